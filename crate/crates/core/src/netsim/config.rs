//! Scenario configuration.

use serde::{Deserialize, Serialize};

use super::scheduler::SchedulerKind;
use crate::consensus::ConsensusMode;
use crate::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeaconKind {
    Dealer,
    Trustless,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Behavior {
    /// Creates `variants` units per round (quick mode: multicast to
    /// disjoint halves; RBC mode: one RBC instance can carry only one).
    Forker { variants: usize },
    /// Sends inconsistent RBC proposals for its units.
    EquivocatingProposer,
    /// Never sends toss shares.
    ShareWithholder,
    /// Deals a key box whose ciphertexts for other nodes are garbage.
    GarbageDealer,
    /// Never takes a step.
    Crash,
    /// Member of a fork-bomb team of depth `depth` starting at round
    /// `start` (quick mode). Team members are taken in id order.
    ForkBomb { depth: usize, start: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByzantineSpec {
    pub node: NodeId,
    pub behaviors: Vec<Behavior>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    pub f: Option<usize>,
    pub mode: ConsensusMode,
    pub beacon: BeaconKind,
    pub scheduler: SchedulerKind,
    pub byzantine: Vec<ByzantineSpec>,
    /// Transactions injected per step (fractional rates accumulate).
    pub tx_rate: f64,
    /// Honest nodes each injected transaction is given to.
    pub tx_fanout: usize,
    pub seed: u64,
    /// Step budget.
    pub budget: u64,
    /// Group backend name.
    pub backend: String,
    /// Quick mode without alerts: every locally valid unit is accepted.
    pub weakened: bool,
    /// Buffer ratio C_B for the RBC size gate.
    pub c_b: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 4,
            f: None,
            mode: ConsensusMode::Aleph,
            beacon: BeaconKind::Dealer,
            scheduler: SchedulerKind::FairRandom,
            byzantine: Vec::new(),
            tx_rate: 0.0,
            tx_fanout: 1,
            seed: 0,
            budget: 20_000,
            backend: "sim63".into(),
            weakened: false,
            c_b: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("n = {n} must equal 3f+1 (f = {f})")]
    Size { n: usize, f: usize },
    #[error("{count} byzantine nodes exceed f = {f}")]
    TooManyByzantine { count: usize, f: usize },
    #[error("byzantine node {0} out of range")]
    NodeOutOfRange(NodeId),
    #[error("unknown group backend {0:?}")]
    Backend(String),
    #[error("{0}")]
    Unsupported(String),
}

impl SimConfig {
    pub fn f(&self) -> usize {
        self.f.unwrap_or((self.n.max(1) - 1) / 3)
    }

    pub fn behaviors(&self, node: NodeId) -> Vec<Behavior> {
        self.byzantine.iter().filter(|b| b.node == node).flat_map(|b| b.behaviors.iter().cloned()).collect()
    }

    pub fn is_byzantine(&self, node: NodeId) -> bool {
        self.byzantine.iter().any(|b| b.node == node)
    }

    pub fn is_crashed(&self, node: NodeId) -> bool {
        self.behaviors(node).contains(&Behavior::Crash)
    }

    pub fn honest(&self) -> Vec<NodeId> {
        (0..self.n).filter(|&i| !self.is_byzantine(i)).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let f = self.f();
        if self.n != 3 * f + 1 {
            return Err(ConfigError::Size { n: self.n, f });
        }
        let mut nodes: Vec<NodeId> = self.byzantine.iter().map(|b| b.node).collect();
        nodes.sort_unstable();
        nodes.dedup();
        if let Some(&bad) = nodes.iter().find(|&&x| x >= self.n) {
            return Err(ConfigError::NodeOutOfRange(bad));
        }
        if nodes.len() > f {
            return Err(ConfigError::TooManyByzantine { count: nodes.len(), f });
        }
        if crate::crypto::GroupBackend::by_name(&self.backend).is_none() {
            return Err(ConfigError::Backend(self.backend.clone()));
        }
        if self.beacon == BeaconKind::Trustless && self.mode == ConsensusMode::Quick {
            return Err(ConfigError::Unsupported("the trustless beacon runs with RBC dissemination (aleph mode)".into()));
        }
        let bombers = self.bombers();
        if let Some((depth, _)) = self.bomb_params() {
            if self.mode != ConsensusMode::Quick {
                return Err(ConfigError::Unsupported("the fork bomb targets quick mode".into()));
            }
            if bombers.len() < 2 * depth {
                return Err(ConfigError::Unsupported(format!("fork bomb of depth {depth} needs {} members", 2 * depth)));
            }
        }
        Ok(())
    }

    /// Nodes carrying a `ForkBomb` behavior, ascending.
    pub fn bombers(&self) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = (0..self.n)
            .filter(|&i| self.behaviors(i).iter().any(|b| matches!(b, Behavior::ForkBomb { .. })))
            .collect();
        out.dedup();
        out
    }

    /// (depth, start) of the fork bomb, if any.
    pub fn bomb_params(&self) -> Option<(usize, u32)> {
        self.byzantine.iter().flat_map(|b| b.behaviors.iter()).find_map(|b| match b {
            Behavior::ForkBomb { depth, start } => Some((*depth, *start)),
            _ => None,
        })
    }

    /// `f` byzantine nodes with the given behaviors, taken from the top ids.
    pub fn with_byzantine(mut self, behaviors: &[Behavior]) -> Self {
        let f = self.f();
        self.byzantine = (self.n - f..self.n).map(|node| ByzantineSpec { node, behaviors: behaviors.to_vec() }).collect();
        self
    }
}
