//! Random pairwise synchronization of dags.
//!
//! A session is two legs: A sends its concise info; B answers with the
//! units A lacks and, if A holds something B lacks, with its own info, to
//! which A answers with units.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::chdag::{ChDag, Unit, UnitIdx};
use crate::crypto::{hash_bytes, Digest, DIGEST_LEN};
use crate::{NodeId, Round};

/// Per creator: top round and the variant hashes at the top two rounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConciseInfo {
    pub tops: Vec<Option<CreatorTop>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CreatorTop {
    pub round: Round,
    pub top: Vec<Digest>,
    pub below: Vec<Digest>,
}

impl ConciseInfo {
    pub fn of(dag: &ChDag) -> Self {
        let tops = (0..dag.n())
            .map(|c| {
                dag.top_round(c).map(|r| CreatorTop {
                    round: r,
                    top: dag.variants(c, r).iter().map(|&u| dag.hash(u)).collect(),
                    below: r.checked_sub(1).map_or(Vec::new(), |p| dag.variants(c, p).iter().map(|&u| dag.hash(u)).collect()),
                })
            })
            .collect();
        ConciseInfo { tops }
    }

    pub fn wire_len(&self) -> usize {
        4 + self.tops.iter().map(|t| t.as_ref().map_or(1, |t| 1 + 4 + 8 + (t.top.len() + t.below.len()) * DIGEST_LEN)).sum::<usize>()
    }

    fn knows(&self, c: NodeId, r: Round, h: &Digest) -> bool {
        match self.tops.get(c).and_then(|t| t.as_ref()) {
            None => false,
            Some(t) if r > t.round => false,
            Some(t) if r == t.round => t.top.contains(h),
            Some(t) if r + 1 == t.round => t.below.contains(h),
            // Lower rounds are assumed known; stragglers come via parent requests.
            Some(_) => true,
        }
    }
}

/// Units of `dag` the peer described by `info` lacks, lowest rounds first,
/// at most `cap`.
pub fn units_peer_lacks(info: &ConciseInfo, dag: &ChDag, cap: usize) -> Vec<Arc<Unit>> {
    let mut out: Vec<UnitIdx> = Vec::new();
    for c in 0..dag.n() {
        let Some(top) = dag.top_round(c) else { continue };
        let from = match info.tops.get(c).and_then(|t| t.as_ref()) {
            None => 0,
            Some(t) => t.round.saturating_sub(1),
        };
        for r in from..=top {
            for &u in dag.variants(c, r) {
                if !info.knows(c, r, &dag.hash(u)) {
                    out.push(u);
                }
            }
        }
    }
    out.sort_by_key(|&u| (dag.round(u), dag.hash(u)));
    out.truncate(cap);
    out.into_iter().map(|u| dag.unit(u).clone()).collect()
}

/// Whether the peer holds some unit this dag lacks.
pub fn peer_has_more(info: &ConciseInfo, dag: &ChDag) -> bool {
    info.tops.iter().enumerate().any(|(c, t)| {
        let Some(t) = t else { return false };
        match dag.top_round(c) {
            None => true,
            Some(mine) if t.round > mine => true,
            _ => t.top.iter().chain(&t.below).any(|h| !dag.contains(h)),
        }
    })
}

/// Request throttling: a peer asking for the same set more than `limit`
/// times within a window of `window` steps is ignored for the rest of it.
pub struct AntiSpam {
    window: u64,
    limit: u32,
    seen: HashMap<(NodeId, Digest), (u64, u32)>,
}

impl AntiSpam {
    pub fn new(window: u64, limit: u32) -> Self {
        AntiSpam { window, limit, seen: HashMap::new() }
    }

    pub fn allow(&mut self, peer: NodeId, request: &[Digest], step: u64) -> bool {
        let mut key = Vec::with_capacity(request.len() * DIGEST_LEN);
        for d in request {
            key.extend_from_slice(d.as_bytes());
        }
        let e = self.seen.entry((peer, hash_bytes(&key))).or_insert((step, 0));
        if step >= e.0 + self.window {
            *e = (step, 0);
        }
        e.1 += 1;
        let ok = e.1 <= self.limit;
        if self.seen.len() > 4096 {
            let w = self.window;
            self.seen.retain(|_, v| step < v.0 + w);
        }
        ok
    }
}

/// Hash set of a dag's units, for tests comparing dags.
pub fn unit_set(dag: &ChDag) -> HashSet<Digest> {
    dag.units().iter().map(|u| u.hash()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chdag::fixtures::TestNet;
    use crate::chdag::{Admit, DagMode, Staging};

    fn grow(net: &TestNet, dag: &mut ChDag, rounds: std::ops::Range<Round>, creators: &[NodeId]) {
        for r in rounds {
            let prev: Vec<_> = if r == 0 { vec![] } else { dag.units_at_round(r - 1).iter().map(|&u| dag.unit(u).clone()).collect() };
            for &c in creators {
                dag.insert(net.unit(c, r, &prev)).unwrap();
            }
        }
    }

    /// Runs one two-leg session, applying units through staging.
    fn sync(a: &mut ChDag, b: &mut ChDag) -> usize {
        let mut moved = 0;
        let to_a = units_peer_lacks(&ConciseInfo::of(a), b, usize::MAX);
        let back = peer_has_more(&ConciseInfo::of(a), b);
        moved += apply(a, to_a);
        if back {
            let to_b = units_peer_lacks(&ConciseInfo::of(b), a, usize::MAX);
            moved += apply(b, to_b);
        }
        moved
    }

    fn apply(dag: &mut ChDag, units: Vec<Arc<Unit>>) -> usize {
        let mut st = Staging::new();
        let n = units.len();
        let mut ready = Vec::new();
        for u in units {
            if let Admit::Ready(u) = st.admit(u, dag) {
                ready.push(u);
            }
        }
        while let Some(u) = ready.pop() {
            let h = u.hash();
            dag.insert(u).unwrap();
            ready.extend(st.on_inserted(&h));
        }
        assert!(st.is_empty());
        n
    }

    #[test]
    fn identical_dags_exchange_nothing() {
        let net = TestNet::new(4);
        let mut a = ChDag::new(4, DagMode::Quick);
        grow(&net, &mut a, 0..3, &[0, 1, 2, 3]);
        let mut b = ChDag::new(4, DagMode::Quick);
        grow(&net, &mut b, 0..3, &[0, 1, 2, 3]);
        assert_eq!(sync(&mut a, &mut b), 0);
    }

    #[test]
    fn diverged_dags_reach_the_union_and_stay_there() {
        let net = TestNet::new(4);
        let mut a = ChDag::new(4, DagMode::Quick);
        grow(&net, &mut a, 0..2, &[0, 1, 2, 3]);
        let mut b = ChDag::new(4, DagMode::Quick);
        for u in a.units().to_vec() {
            b.insert(u).unwrap();
        }
        grow(&net, &mut a, 2..5, &[0, 1, 2]);
        let extra = net.unit_with_txs(3, 2, &b.units_at_round(1).iter().map(|&u| b.unit(u).clone()).collect::<Vec<_>>(), vec![b"b".to_vec()]);
        b.insert(extra).unwrap();
        let union: HashSet<Digest> = unit_set(&a).union(&unit_set(&b)).copied().collect();
        assert!(sync(&mut a, &mut b) > 0);
        assert_eq!(unit_set(&a), union);
        assert_eq!(unit_set(&b), union);
        assert_eq!(sync(&mut a, &mut b), 0);
    }

    #[test]
    fn variants_at_top_rounds_are_exchanged() {
        let net = TestNet::new(4);
        let mut a = ChDag::new(4, DagMode::Quick);
        let mut b = ChDag::new(4, DagMode::Quick);
        a.insert(net.unit_with_txs(0, 0, &[], vec![b"1".to_vec()])).unwrap();
        b.insert(net.unit_with_txs(0, 0, &[], vec![b"2".to_vec()])).unwrap();
        assert!(peer_has_more(&ConciseInfo::of(&a), &b));
        sync(&mut a, &mut b);
        assert_eq!(a.variants(0, 0).len(), 2);
        assert_eq!(b.variants(0, 0).len(), 2);
    }

    #[test]
    fn anti_spam_window() {
        let mut s = AntiSpam::new(100, 3);
        let req = [Digest([1; 32])];
        for _ in 0..3 {
            assert!(s.allow(5, &req, 10));
        }
        assert!(!s.allow(5, &req, 20));
        assert!(s.allow(6, &req, 20));
        assert!(s.allow(5, &[Digest([2; 32])], 20));
        assert!(s.allow(5, &req, 111));
    }
}
