//! Reference `OrderUnits`: a direct, uncached-across-calls transcription used
//! to cross-check the incremental [`Orderer`](super::Orderer).

use std::collections::{HashMap, HashSet};

use super::order::{default_index, priority, LinearOrder};
use super::{ConsensusMode, SecretSource};
use crate::chdag::{ChDag, UnitIdx};
use crate::crypto::hash_bytes;
use crate::Round;

struct Ctx<'a> {
    dag: &'a ChDag,
    mode: ConsensusMode,
    bits: &'a mut dyn SecretSource,
    votes: HashMap<(UnitIdx, UnitIdx), Option<bool>>,
}

impl Ctx<'_> {
    fn cv(&mut self, u0: UnitIdx, r: Round) -> Option<bool> {
        let r0 = self.dag.round(u0);
        let c = self.dag.creator(u0);
        match self.mode {
            ConsensusMode::Aleph => {
                if r <= r0 + 3 {
                    Some(true)
                } else if r == r0 + 4 {
                    Some(false)
                } else {
                    let x = self.bits.secret_bits(c, r, self.dag)?;
                    Some(hash_bytes(x.as_bytes()).as_bytes()[0] & 0x80 != 0)
                }
            }
            ConsensusMode::Quick => {
                if r <= r0 + 2 {
                    Some(true)
                } else if r == r0 + 3 {
                    Some(false)
                } else {
                    let x = self.bits.secret_bits(c, r + 1, self.dag)?;
                    Some(x.as_bytes()[0] & 0x80 != 0)
                }
            }
        }
    }

    fn prev_layer(&self, u: UnitIdx) -> Vec<UnitIdx> {
        let r = self.dag.round(u);
        self.dag.parents(u).iter().copied().filter(|&p| self.dag.round(p) + 1 == r).collect()
    }

    fn vote(&mut self, u0: UnitIdx, u: UnitIdx) -> Option<bool> {
        if self.dag.round(u) == self.dag.round(u0) + 1 {
            return Some(self.dag.parents(u).contains(&u0));
        }
        if let Some(v) = self.votes.get(&(u0, u)) {
            return *v;
        }
        let mut seen = Vec::new();
        for p in self.prev_layer(u) {
            seen.push(self.vote(u0, p));
        }
        let v = if seen.contains(&Some(true)) && seen.contains(&Some(false)) {
            self.cv(u0, self.dag.round(u))
        } else if seen.contains(&None) {
            None
        } else {
            Some(seen.contains(&Some(true)))
        };
        self.votes.insert((u0, u), v);
        v
    }

    fn unit_decide(&mut self, u0: UnitIdx, u: UnitIdx) -> Option<bool> {
        if self.dag.round(u) < self.dag.round(u0) + 2 {
            return None;
        }
        let v = self.cv(u0, self.dag.round(u))?;
        let n = self.prev_layer(u).into_iter().filter(|&p| self.vote(u0, p) == Some(v)).count();
        (n >= self.dag.quorum()).then_some(v)
    }

    fn decide(&mut self, u0: UnitIdx) -> Option<bool> {
        (0..self.dag.len()).find_map(|u| self.unit_decide(u0, u))
    }

    fn permutation(&mut self, r: Round) -> Option<Vec<UnitIdx>> {
        let layer: Vec<UnitIdx> = (0..self.dag.len()).filter(|&u| self.dag.round(u) == r).collect();
        let ranked = |ctx: &mut Self, us: Vec<UnitIdx>, reveal: Round| -> Result<Vec<UnitIdx>, ()> {
            let mut v = Vec::new();
            for u in us {
                let x = ctx.bits.secret_bits(ctx.dag.creator(u), reveal, ctx.dag).ok_or(())?;
                v.push((priority(&x, ctx.dag.unit(u).canonical_encode()), u));
            }
            v.sort();
            Ok(v.into_iter().map(|p| p.1).collect())
        };
        match self.mode {
            ConsensusMode::Aleph => ranked(self, layer, r + 4).ok(),
            ConsensusMode::Quick => {
                if self.dag.height().map_or(true, |h| h < r + 3) {
                    return None;
                }
                let i0 = default_index(r, self.dag.n());
                let (mut first, rest): (Vec<UnitIdx>, Vec<UnitIdx>) =
                    layer.into_iter().partition(|&u| self.dag.creator(u) == i0);
                first.sort_by_key(|&u| self.dag.hash(u));
                if let Ok(tail) = ranked(self, rest, r + 5) {
                    first.extend(tail);
                }
                Some(first)
            }
        }
    }

    fn choose_head(&mut self, r: Round) -> Option<UnitIdx> {
        for u in self.permutation(r)? {
            match self.decide(u) {
                Some(true) => return Some(u),
                Some(false) => {}
                None => return None,
            }
        }
        None
    }
}

/// `OrderUnits` over a snapshot, choosing heads from `start_round` on.
pub fn order_units(dag: &ChDag, mode: ConsensusMode, start_round: Round, bits: &mut dyn SecretSource) -> LinearOrder {
    let mut ctx = Ctx { dag, mode, bits, votes: HashMap::new() };
    let mut out = LinearOrder::default();
    let mut done: HashSet<UnitIdx> = HashSet::new();
    let mut r = start_round;
    while let Some(head) = ctx.choose_head(r) {
        let mut batch: Vec<UnitIdx> =
            (0..dag.len()).filter(|&u| !done.contains(&u) && dag.is_below(u, head)).collect();
        batch.sort_by_key(|&u| (dag.round(u), dag.hash(u)));
        done.extend(batch.iter().copied());
        out.units.extend(batch.iter().map(|&u| dag.hash(u)));
        out.heads.push((r, dag.hash(head)));
        r += 1;
    }
    out
}
