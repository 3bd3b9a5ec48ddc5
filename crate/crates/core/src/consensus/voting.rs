//! Virtual voting: `Vote`, `UnitDecide`, `Decide` and `CommonVote`.

use std::collections::HashMap;

use serde::Serialize;

use super::{ConsensusMode, SecretSource};
use crate::chdag::{ChDag, UnitIdx};
use crate::crypto::hash_bytes;
use crate::{NodeId, Round};

/// Outcome of `UnitDecide`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitDecision {
    Decided(bool),
    /// Definitively ⊥ for this deciding unit.
    No,
    /// ⊥ because a needed secret is not yet revealed in this dag.
    Unknown,
}

/// A decision, streamed to the trace sink.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecisionEvent {
    pub unit: String,
    pub creator: NodeId,
    pub round: Round,
    pub bit: bool,
    pub decided_by: String,
    pub decided_at: Round,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("conflicting decisions on unit {unit}: {first} and {second}")]
pub struct SafetyFault {
    pub unit: String,
    pub first: bool,
    pub second: bool,
}

fn key(a: UnitIdx, b: UnitIdx) -> u64 {
    ((a as u64) << 32) | b as u64
}

/// `CommonVote(U0, r)` where `r0 = ρ(U0)` and `creator = creator(U0)`.
pub fn common_vote(
    mode: ConsensusMode,
    creator: NodeId,
    r0: Round,
    r: Round,
    dag: &ChDag,
    bits: &mut dyn SecretSource,
) -> Option<bool> {
    let d = r.saturating_sub(r0);
    match mode {
        ConsensusMode::Aleph => match d {
            0..=3 => Some(true),
            4 => Some(false),
            _ => bits.secret_bits(creator, r, dag).map(|s| hash_bytes(s.as_bytes()).first_bit()),
        },
        ConsensusMode::Quick => match d {
            0..=2 => Some(true),
            3 => Some(false),
            _ => bits.secret_bits(creator, r + 1, dag).map(|s| s.first_bit()),
        },
    }
}

/// Memoized voting state for one dag.
pub struct Voting {
    mode: ConsensusMode,
    votes: HashMap<u64, bool>,
    unit_decisions: HashMap<u64, Option<bool>>,
    decisions: HashMap<UnitIdx, (bool, UnitIdx)>,
    audit: bool,
    trace: Option<Vec<DecisionEvent>>,
}

impl Voting {
    pub fn new(mode: ConsensusMode) -> Self {
        Voting {
            mode,
            votes: HashMap::new(),
            unit_decisions: HashMap::new(),
            decisions: HashMap::new(),
            audit: false,
            trace: None,
        }
    }

    /// After each new decision, check every deciding unit in the dag for a
    /// conflicting bit.
    pub fn with_audit(mut self, on: bool) -> Self {
        self.audit = on;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn mode(&self) -> ConsensusMode {
        self.mode
    }

    pub fn take_trace(&mut self) -> Vec<DecisionEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn decided(&self, u0: UnitIdx) -> Option<bool> {
        self.decisions.get(&u0).map(|d| d.0)
    }

    pub fn decisions(&self) -> impl Iterator<Item = (UnitIdx, bool)> + '_ {
        self.decisions.iter().map(|(&u, &(b, _))| (u, b))
    }

    pub fn common_vote(&self, u0: UnitIdx, r: Round, dag: &ChDag, bits: &mut dyn SecretSource) -> Option<bool> {
        common_vote(self.mode, dag.creator(u0), dag.round(u0), r, dag, bits)
    }

    /// `Vote(U0, U)` for ρ(U) > ρ(U0); `None` when a secret is missing.
    pub fn vote(&mut self, u0: UnitIdx, u: UnitIdx, dag: &ChDag, bits: &mut dyn SecretSource) -> Option<bool> {
        let r0 = dag.round(u0);
        let r = dag.round(u);
        debug_assert!(r > r0);
        if r == r0 + 1 {
            return Some(dag.round_parents(u).contains(&u0));
        }
        if let Some(&v) = self.votes.get(&key(u0, u)) {
            return Some(v);
        }
        let (mut zero, mut one, mut unknown) = (false, false, false);
        for &p in dag.round_parents(u) {
            match self.vote(u0, p, dag, bits) {
                Some(true) => one = true,
                Some(false) => zero = true,
                None => unknown = true,
            }
            if zero && one {
                break;
            }
        }
        let v = if zero && one {
            self.common_vote(u0, r, dag, bits)
        } else if unknown {
            None
        } else {
            Some(one)
        };
        if let Some(v) = v {
            self.votes.insert(key(u0, u), v);
        }
        v
    }

    /// `UnitDecide(U0, U)`.
    pub fn unit_decide(&mut self, u0: UnitIdx, u: UnitIdx, dag: &ChDag, bits: &mut dyn SecretSource) -> UnitDecision {
        let r0 = dag.round(u0);
        let r = dag.round(u);
        if r < r0 + 2 {
            return UnitDecision::No;
        }
        if let Some(&d) = self.unit_decisions.get(&key(u0, u)) {
            return d.map_or(UnitDecision::No, UnitDecision::Decided);
        }
        let Some(v) = self.common_vote(u0, r, dag, bits) else {
            return UnitDecision::Unknown;
        };
        let quorum = dag.quorum();
        let (mut agree, mut unknown) = (0usize, 0usize);
        for &p in dag.round_parents(u) {
            match self.vote(u0, p, dag, bits) {
                Some(x) if x == v => agree += 1,
                Some(_) => {}
                None => unknown += 1,
            }
        }
        let out = if agree >= quorum {
            UnitDecision::Decided(v)
        } else if unknown > 0 && agree + unknown >= quorum {
            UnitDecision::Unknown
        } else {
            UnitDecision::No
        };
        match out {
            UnitDecision::Decided(b) => {
                self.unit_decisions.insert(key(u0, u), Some(b));
            }
            UnitDecision::No => {
                self.unit_decisions.insert(key(u0, u), None);
            }
            UnitDecision::Unknown => {}
        }
        out
    }

    /// `Decide(U0)`: scans deciding candidates by (round, hash).
    pub fn decide(&mut self, u0: UnitIdx, dag: &ChDag, bits: &mut dyn SecretSource) -> Result<Option<bool>, SafetyFault> {
        if let Some(&(b, _)) = self.decisions.get(&u0) {
            return Ok(Some(b));
        }
        let Some(h) = dag.height() else { return Ok(None) };
        let r0 = dag.round(u0);
        for r in r0 + 2..=h {
            let mut layer = dag.units_at_round(r).to_vec();
            layer.sort_by_key(|&x| dag.hash(x));
            for u in layer {
                if let UnitDecision::Decided(b) = self.unit_decide(u0, u, dag, bits) {
                    self.decisions.insert(u0, (b, u));
                    if let Some(t) = self.trace.as_mut() {
                        t.push(DecisionEvent {
                            unit: dag.hash(u0).to_hex(),
                            creator: dag.creator(u0),
                            round: r0,
                            bit: b,
                            decided_by: dag.hash(u).to_hex(),
                            decided_at: r,
                        });
                    }
                    if self.audit {
                        self.audit_unit(u0, b, dag, bits)?;
                    }
                    return Ok(Some(b));
                }
            }
        }
        Ok(None)
    }

    /// Checks that no unit of the dag decides `U0` the other way.
    pub fn audit_unit(&mut self, u0: UnitIdx, b: bool, dag: &ChDag, bits: &mut dyn SecretSource) -> Result<(), SafetyFault> {
        let Some(h) = dag.height() else { return Ok(()) };
        for r in dag.round(u0) + 2..=h {
            for &u in dag.units_at_round(r) {
                if self.unit_decide(u0, u, dag, bits) == UnitDecision::Decided(!b) {
                    return Err(SafetyFault { unit: dag.hash(u0).to_hex(), first: b, second: !b });
                }
            }
        }
        Ok(())
    }

    /// Drops memo entries for targets of rounds below `r`.
    pub fn forget_below(&mut self, r: Round, dag: &ChDag) {
        let old = |k: &u64| dag.round((k >> 32) as usize) < r;
        self.votes.retain(|k, _| !old(k));
        self.unit_decisions.retain(|k, _| !old(k));
    }
}
