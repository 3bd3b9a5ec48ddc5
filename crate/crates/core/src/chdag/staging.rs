use std::collections::HashMap;
use std::sync::Arc;

use super::dag::ChDag;
use super::unit::Unit;
use crate::crypto::Digest;

/// Units whose parents are not all known yet.
#[derive(Default)]
pub struct Staging {
    waiting: HashMap<Digest, (Arc<Unit>, usize)>,
    dependents: HashMap<Digest, Vec<Digest>>,
}

pub enum Admit {
    /// All parents present; the caller validates and inserts.
    Ready(Arc<Unit>),
    Staged,
    Known,
}

impl Staging {
    pub fn new() -> Self {
        Staging::default()
    }

    pub fn len(&self) -> usize {
        self.waiting.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waiting.is_empty()
    }

    pub fn contains(&self, h: &Digest) -> bool {
        self.waiting.contains_key(h)
    }

    pub fn get(&self, h: &Digest) -> Option<&Arc<Unit>> {
        self.waiting.get(h).map(|(u, _)| u)
    }

    /// Staged units waiting for `h`.
    pub fn dependents_of(&self, h: &Digest) -> &[Digest] {
        self.dependents.get(h).map_or(&[], |d| d.as_slice())
    }

    /// Hashes referenced by staged units that are neither in `dag` nor staged.
    pub fn missing(&self, dag: &ChDag) -> Vec<Digest> {
        let mut out: Vec<Digest> = self
            .dependents
            .keys()
            .filter(|h| !dag.contains(h) && !self.waiting.contains_key(h))
            .copied()
            .collect();
        out.sort();
        out
    }

    pub fn admit(&mut self, u: Arc<Unit>, dag: &ChDag) -> Admit {
        let h = u.hash();
        if dag.contains(&h) || self.waiting.contains_key(&h) {
            return Admit::Known;
        }
        let missing: Vec<Digest> = u.parents().iter().filter(|p| !dag.contains(p)).copied().collect();
        if missing.is_empty() {
            return Admit::Ready(u);
        }
        for p in &missing {
            self.dependents.entry(*p).or_default().push(h);
        }
        self.waiting.insert(h, (u, missing.len()));
        Admit::Staged
    }

    /// Call after `h` entered the dag; returns units that became ready.
    pub fn on_inserted(&mut self, h: &Digest) -> Vec<Arc<Unit>> {
        let mut ready = Vec::new();
        if let Some(deps) = self.dependents.remove(h) {
            for d in deps {
                if let Some(entry) = self.waiting.get_mut(&d) {
                    entry.1 -= 1;
                    if entry.1 == 0 {
                        ready.push(self.waiting.remove(&d).unwrap().0);
                    }
                }
            }
        }
        ready.sort_by_key(|u| (u.round(), u.hash()));
        ready
    }

    /// Drops a staged unit and everything waiting on it.
    pub fn discard(&mut self, h: &Digest) {
        let mut stack = vec![*h];
        while let Some(x) = stack.pop() {
            self.waiting.remove(&x);
            if let Some(deps) = self.dependents.remove(&x) {
                stack.extend(deps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chdag::fixtures::TestNet;
    use crate::chdag::DagMode;

    #[test]
    fn drains_in_causal_order() {
        let net = TestNet::new(4);
        let r0: Vec<_> = (0..4).map(|c| net.unit(c, 0, &[])).collect();
        let r1: Vec<_> = (0..4).map(|c| net.unit(c, 1, &r0)).collect();
        let mut dag = ChDag::new(4, DagMode::Rbc);
        let mut st = Staging::new();
        for u in &r1 {
            assert!(matches!(st.admit(u.clone(), &dag), Admit::Staged));
        }
        assert_eq!(st.missing(&dag).len(), 4);
        let mut released = Vec::new();
        for u in &r0 {
            dag.insert(u.clone()).unwrap();
            released.extend(st.on_inserted(&u.hash()));
        }
        assert_eq!(released.len(), 4);
        assert!(st.is_empty());
    }
}
