//! Head selection and the incremental linear order.

use std::collections::HashMap;

use serde::Serialize;

use super::voting::{SafetyFault, Voting};
use super::{ConsensusMode, SecretSource};
use crate::chdag::{ChDag, UnitIdx};
use crate::crypto::{hash_bytes, Digest};
use crate::{NodeId, Round};

/// Ordered unit hashes and the head of each round.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LinearOrder {
    pub units: Vec<Digest>,
    pub heads: Vec<(Round, Digest)>,
}

impl LinearOrder {
    pub fn is_prefix_of(&self, other: &LinearOrder) -> bool {
        self.units.len() <= other.units.len() && other.units[..self.units.len()] == self.units[..]
    }
}

/// A head fixed at `round` while the local dag had height `height`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeadEvent {
    pub round: Round,
    pub head: UnitIdx,
    pub height: Round,
    /// Units appended to the order for this head.
    pub batch_len: usize,
}

/// Quick-mode default creator for round `r`, as a 0-based index.
pub fn default_index(r: Round, n: usize) -> NodeId {
    r as usize % n
}

/// hash(x ‖ encoding of U).
pub fn priority(secret: &Digest, encoded: &[u8]) -> Digest {
    let mut buf = Vec::with_capacity(32 + encoded.len());
    buf.extend_from_slice(secret.as_bytes());
    buf.extend_from_slice(encoded);
    hash_bytes(&buf)
}

pub struct Orderer {
    voting: Voting,
    next_round: Round,
    priorities: HashMap<UnitIdx, Digest>,
    ordered: Vec<bool>,
    order: Vec<UnitIdx>,
    heads: Vec<UnitIdx>,
}

impl Orderer {
    /// Heads are chosen for rounds `start_round, start_round+1, …`.
    pub fn new(voting: Voting, start_round: Round) -> Self {
        Orderer {
            voting,
            next_round: start_round,
            priorities: HashMap::new(),
            ordered: Vec::new(),
            order: Vec::new(),
            heads: Vec::new(),
        }
    }

    pub fn mode(&self) -> ConsensusMode {
        self.voting.mode()
    }

    pub fn voting(&mut self) -> &mut Voting {
        &mut self.voting
    }

    pub fn voting_ref(&self) -> &Voting {
        &self.voting
    }

    pub fn next_round(&self) -> Round {
        self.next_round
    }

    pub fn order(&self) -> &[UnitIdx] {
        &self.order
    }

    pub fn heads(&self) -> &[UnitIdx] {
        &self.heads
    }

    pub fn is_ordered(&self, u: UnitIdx) -> bool {
        self.ordered.get(u).copied().unwrap_or(false)
    }

    pub fn linear_order(&self, dag: &ChDag) -> LinearOrder {
        LinearOrder {
            units: self.order.iter().map(|&u| dag.hash(u)).collect(),
            heads: self.heads.iter().map(|&h| (dag.round(h), dag.hash(h))).collect(),
        }
    }

    fn priority_of(&mut self, u: UnitIdx, reveal: Round, dag: &ChDag, bits: &mut dyn SecretSource) -> Option<Digest> {
        if let Some(p) = self.priorities.get(&u) {
            return Some(*p);
        }
        let x = bits.secret_bits(dag.creator(u), reveal, dag)?;
        let p = priority(&x, dag.unit(u).canonical_encode());
        self.priorities.insert(u, p);
        Some(p)
    }

    /// `GeneratePermutation(r)` for the configured mode.
    pub fn generate_permutation(&mut self, r: Round, dag: &ChDag, bits: &mut dyn SecretSource) -> Option<Vec<UnitIdx>> {
        let layer = dag.units_at_round(r).to_vec();
        match self.mode() {
            ConsensusMode::Aleph => {
                let mut keyed = Vec::with_capacity(layer.len());
                for u in layer {
                    keyed.push((self.priority_of(u, r + 4, dag, bits)?, u));
                }
                keyed.sort();
                Some(keyed.into_iter().map(|(_, u)| u).collect())
            }
            ConsensusMode::Quick => {
                if dag.height_i64() < r as i64 + 3 {
                    return None;
                }
                let i0 = default_index(r, dag.n());
                let mut out: Vec<UnitIdx> = dag.variants(i0, r).to_vec();
                let mut keyed = Vec::new();
                for u in layer.into_iter().filter(|&u| dag.creator(u) != i0) {
                    match self.priority_of(u, r + 5, dag, bits) {
                        Some(p) => keyed.push((p, u)),
                        None => return Some(out),
                    }
                }
                keyed.sort();
                out.extend(keyed.into_iter().map(|(_, u)| u));
                Some(out)
            }
        }
    }

    /// `ChooseHead(r)`.
    pub fn choose_head(&mut self, r: Round, dag: &ChDag, bits: &mut dyn SecretSource) -> Result<Option<UnitIdx>, SafetyFault> {
        let Some(perm) = self.generate_permutation(r, dag, bits) else {
            return Ok(None);
        };
        for u in perm {
            match self.voting.decide(u, dag, bits)? {
                Some(true) => return Ok(Some(u)),
                Some(false) => continue,
                None => return Ok(None),
            }
        }
        Ok(None)
    }

    /// Extends the order as far as the dag allows.
    pub fn update(&mut self, dag: &ChDag, bits: &mut dyn SecretSource) -> Result<Vec<HeadEvent>, SafetyFault> {
        let mut events = Vec::new();
        loop {
            let r = self.next_round;
            if dag.height_i64() < r as i64 {
                break;
            }
            let Some(head) = self.choose_head(r, dag, bits)? else { break };
            let before = self.order.len();
            self.append_batch(head, dag);
            self.heads.push(head);
            events.push(HeadEvent {
                round: r,
                head,
                height: dag.height().unwrap_or(0),
                batch_len: self.order.len() - before,
            });
            self.next_round += 1;
            self.voting.forget_below(r, dag);
            self.priorities.retain(|&u, _| dag.round(u) > r);
        }
        Ok(events)
    }

    fn append_batch(&mut self, head: UnitIdx, dag: &ChDag) {
        if self.ordered.len() < dag.len() {
            self.ordered.resize(dag.len(), false);
        }
        let ordered = &self.ordered;
        let mut batch = dag.collect_below(&[head], |x| !ordered.get(x).copied().unwrap_or(false));
        batch.sort_by_key(|&u| (dag.round(u), dag.hash(u)));
        for &u in &batch {
            self.ordered[u] = true;
        }
        self.order.extend(batch);
    }
}
