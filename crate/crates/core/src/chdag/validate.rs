use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use super::dag::ChDag;
use super::unit::Unit;
use super::DagMode;
use crate::crypto::{Digest, Element, GroupBackend};
use crate::{NodeId, Round};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    UnknownCreator(NodeId),
    BadSignature,
    Dangling(Vec<Digest>),
    /// Two parents by the same creator.
    Diversity(NodeId),
    TooManyParents(usize),
    Dissemination { have: usize, need: usize },
    /// Missing or misplaced parent by the unit's own creator.
    SelfParent,
    RoundMismatch { claimed: Round, actual: Round },
    /// A second variant at occupied coordinates (RBC mode).
    Chains,
    Payload(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownCreator(c) => write!(f, "unknown creator {c}"),
            Violation::BadSignature => write!(f, "bad signature"),
            Violation::Dangling(m) => write!(f, "{} parents missing", m.len()),
            Violation::Diversity(c) => write!(f, "two parents by creator {c}"),
            Violation::TooManyParents(n) => write!(f, "{n} parents"),
            Violation::Dissemination { have, need } => write!(f, "{have} parents of previous round, need {need}"),
            Violation::SelfParent => write!(f, "self-parent rule"),
            Violation::RoundMismatch { claimed, actual } => write!(f, "round hint {claimed}, actual {actual}"),
            Violation::Chains => write!(f, "second unit at occupied coordinates"),
            Violation::Payload(s) => write!(f, "payload: {s}"),
        }
    }
}

/// Checks on payload sections, registered by the randomness source.
pub trait PayloadRules: Send + Sync {
    /// Called with the unit's parents present; `round` is its dag round.
    fn check(&self, unit: &Unit, round: Round, dag: &ChDag) -> Result<(), String>;
}

/// Validation context shared by the honest nodes of one world.
#[derive(Clone)]
pub struct Validator {
    backend: Arc<GroupBackend>,
    public_keys: Arc<Vec<Element>>,
    rules: Option<Arc<dyn PayloadRules>>,
}

impl Validator {
    pub fn new(backend: Arc<GroupBackend>, public_keys: Arc<Vec<Element>>) -> Self {
        Validator { backend, public_keys, rules: None }
    }

    pub fn with_rules(mut self, rules: Arc<dyn PayloadRules>) -> Self {
        self.rules = Some(rules);
        self
    }

    pub fn backend(&self) -> &Arc<GroupBackend> {
        &self.backend
    }

    pub fn public_key(&self, c: NodeId) -> Option<&Element> {
        self.public_keys.get(c)
    }

    /// Checks that need no dag: creator range and signature.
    pub fn check_context_free(&self, u: &Unit) -> Result<(), Violation> {
        let Some(pk) = self.public_keys.get(u.creator()) else {
            return Err(Violation::UnknownCreator(u.creator()));
        };
        if !u.verify_signature(&self.backend, pk) {
            return Err(Violation::BadSignature);
        }
        Ok(())
    }

    /// Full validity of `u` against `dag`; returns the unit's round.
    pub fn validate(&self, u: &Unit, dag: &ChDag) -> Result<Round, Vec<Violation>> {
        if let Err(v) = self.check_context_free(u) {
            return Err(vec![v]);
        }
        self.validate_structure(u, dag, true)
    }

    /// Everything except the signature check.
    pub fn validate_structure(&self, u: &Unit, dag: &ChDag, with_payload: bool) -> Result<Round, Vec<Violation>> {
        let mut out = structural_violations(u, dag);
        let round = match dag.round_of(u) {
            Ok(r) => r,
            Err(_) => return Err(out),
        };
        if out.is_empty() && with_payload {
            if let Some(rules) = &self.rules {
                if let Err(e) = rules.check(u, round, dag) {
                    out.push(Violation::Payload(e));
                }
            }
        }
        if out.is_empty() {
            Ok(round)
        } else {
            Err(out)
        }
    }
}

/// Dag-shape checks: diversity, parent bound, dissemination, self-parent
/// chain, round hint, and chains in RBC mode.
pub fn structural_violations(u: &Unit, dag: &ChDag) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = dag.n();
    if u.creator() >= n {
        out.push(Violation::UnknownCreator(u.creator()));
        return out;
    }
    let round = match dag.round_of(u) {
        Ok(r) => r,
        Err(super::DagError::Dangling(m)) => {
            out.push(Violation::Dangling(m));
            return out;
        }
        Err(_) => unreachable!("round_of only reports dangling parents"),
    };
    if u.parents().len() > n {
        out.push(Violation::TooManyParents(u.parents().len()));
    }
    let parents: Vec<usize> = u.parents().iter().map(|p| dag.lookup(p).unwrap()).collect();
    let mut seen = HashSet::new();
    for &p in &parents {
        let c = dag.creator(p);
        if !seen.insert(c) {
            out.push(Violation::Diversity(c));
        }
    }
    if round > 0 {
        let have = parents.iter().filter(|&&p| dag.round(p) + 1 == round).count();
        if have < dag.quorum() {
            out.push(Violation::Dissemination { have, need: dag.quorum() });
        }
        let own: Vec<_> = parents.iter().filter(|&&p| dag.creator(p) == u.creator()).collect();
        if own.len() != 1 || dag.round(*own[0]) + 1 != round {
            out.push(Violation::SelfParent);
        }
    }
    if u.round() != round {
        out.push(Violation::RoundMismatch { claimed: u.round(), actual: round });
    }
    if dag.mode() == DagMode::Rbc {
        let occupied = dag.variants(u.creator(), round);
        if occupied.iter().any(|&i| dag.hash(i) != u.hash()) {
            out.push(Violation::Chains);
        }
    }
    out
}
