//! The exponential fork-bomb construction.
//!
//! Bomb nodes are taken in pairs: pair k = (`nodes[2k−2]`, `nodes[2k−1]`)
//! forks at round r+k with 2^{K−k} variants each. For k > 1 the i-th variant
//! of the first node of pair k sits on variant 2i−1 of both nodes of pair
//! k−1, and the i-th variant of the second node on variant 2i. Every unit
//! also links its creator's regular round-(r+k−1) unit and the supplied
//! non-bomb units of that round.

use std::sync::Arc;

use crate::chdag::{Payload, Unit};
use crate::crypto::{GroupBackend, SigningKey};
use crate::{NodeId, Round};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BombError {
    #[error("fork bomb with K = {k} needs {need} byzantine nodes, {have} available")]
    NotEnoughNodes { k: usize, have: usize, need: usize },
    #[error("K must be at least 1")]
    ZeroDepth,
    #[error("regular unit of node {node} at round {round} missing")]
    MissingOwn { node: NodeId, round: Round },
}

pub struct ForkBombPlan {
    pub depth: usize,
    pub start: Round,
    /// Bomb nodes 1..2K in order.
    pub nodes: Vec<NodeId>,
}

pub struct ForkBomb {
    /// All bomb units in causal order.
    pub units: Vec<Arc<Unit>>,
    /// The two round-(r+K) units that get broadcast.
    pub finals: Vec<Arc<Unit>>,
    /// `layers[k−1][s][i]`: variant i+1 of pair member s at round r+k.
    pub layers: Vec<[Vec<Arc<Unit>>; 2]>,
}

impl ForkBombPlan {
    pub fn new(depth: usize, start: Round, available: &[NodeId]) -> Result<Self, BombError> {
        if depth == 0 {
            return Err(BombError::ZeroDepth);
        }
        if available.len() < 2 * depth {
            return Err(BombError::NotEnoughNodes { k: depth, have: available.len(), need: 2 * depth });
        }
        Ok(ForkBombPlan { depth, start, nodes: available[..2 * depth].to_vec() })
    }

    /// Round at which pair `k` (1-based) forks.
    pub fn fork_round(&self, k: usize) -> Round {
        self.start + k as Round
    }

    /// Pair (1-based) of a bomb node.
    pub fn pair_of(&self, node: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&x| x == node).map(|p| p / 2 + 1)
    }

    pub fn total_units(&self) -> usize {
        (1usize << (self.depth + 1)) - 2
    }

    /// Builds every bomb unit.
    ///
    /// `others(r)` gives the non-bomb units linked at round r, `own(j, r)`
    /// the regular unit of bomb node j at round r, and `payload(j, r)` the
    /// payload of j's units at round r (variant-distinguishing data is
    /// appended where parents alone do not separate variants).
    pub fn build(
        &self,
        backend: &GroupBackend,
        key: &dyn Fn(NodeId) -> SigningKey,
        others: &dyn Fn(Round) -> Vec<Arc<Unit>>,
        own: &dyn Fn(NodeId, Round) -> Option<Arc<Unit>>,
        payload: &mut dyn FnMut(NodeId, Round) -> Payload,
    ) -> Result<ForkBomb, BombError> {
        let k_max = self.depth;
        let mut layers: Vec<[Vec<Arc<Unit>>; 2]> = Vec::with_capacity(k_max);
        let mut units = Vec::with_capacity(self.total_units());
        for k in 1..=k_max {
            let r = self.fork_round(k);
            let below = others(r - 1);
            let count = 1usize << (k_max - k);
            let mut pair: [Vec<Arc<Unit>>; 2] = [Vec::with_capacity(count), Vec::with_capacity(count)];
            for s in 0..2 {
                let node = self.nodes[2 * (k - 1) + s];
                let sk = key(node);
                let own_prev = own(node, r - 1).ok_or(BombError::MissingOwn { node, round: r - 1 })?;
                let base = payload(node, r);
                for i in 0..count {
                    let mut parents: Vec<_> = below.iter().map(|u| u.hash()).collect();
                    parents.push(own_prev.hash());
                    let mut pl = base.clone();
                    if k == 1 {
                        pl.transactions.push(format!("fork {node} {r} {i}").into_bytes());
                    } else {
                        // 0-based: variant i uses 2i (first node) or 2i+1 (second).
                        let prev = &layers[k - 2];
                        parents.push(prev[0][2 * i + s].hash());
                        parents.push(prev[1][2 * i + s].hash());
                    }
                    let u = Arc::new(Unit::new_signed(backend, &sk, node, r, parents, pl));
                    units.push(u.clone());
                    pair[s].push(u);
                }
            }
            layers.push(pair);
        }
        let last = &layers[k_max - 1];
        let finals = vec![last[0][0].clone(), last[1][0].clone()];
        Ok(ForkBomb { units, finals, layers })
    }
}
