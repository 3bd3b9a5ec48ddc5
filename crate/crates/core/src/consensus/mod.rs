//! Virtual-voting consensus over the ch-DAG.
//!
//! [`Voting`] answers `Vote`, `UnitDecide` and `Decide`; [`Orderer`] walks
//! the permutations, fixes heads and produces the linear order. Both modes
//! share the same code and differ only in the common-vote pattern and the
//! permutation.

mod oracle;
mod order;
mod voting;

use serde::{Deserialize, Serialize};

use crate::chdag::ChDag;
use crate::crypto::{Digest, Hasher};
use crate::{NodeId, Round};

pub use oracle::order_units;
pub use order::{default_index, priority, HeadEvent, LinearOrder, Orderer};
pub use voting::{common_vote, DecisionEvent, SafetyFault, UnitDecision, Voting};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusMode {
    Aleph,
    Quick,
}

/// `SecretBits(i, r)` as seen from one dag.
pub trait SecretSource {
    fn secret_bits(&mut self, i: NodeId, r: Round, dag: &ChDag) -> Option<Digest>;
}

/// Pseudo-random secrets that become readable once the dag reaches
/// `r + lag`. Used by tests and by the consensus benches.
#[derive(Clone, Debug)]
pub struct ScheduledSecrets {
    pub seed: u64,
    pub lag: Round,
}

impl ScheduledSecrets {
    pub fn new(seed: u64) -> Self {
        ScheduledSecrets { seed, lag: 0 }
    }

    pub fn value(&self, i: NodeId, r: Round) -> Digest {
        let mut h = Hasher::new("scheduled-secret");
        h.u64(self.seed).u64(i as u64).u64(r as u64);
        h.finish()
    }
}

impl SecretSource for ScheduledSecrets {
    fn secret_bits(&mut self, i: NodeId, r: Round, dag: &ChDag) -> Option<Digest> {
        (dag.height_i64() >= r as i64 + self.lag as i64).then(|| self.value(i, r))
    }
}

#[cfg(test)]
mod tests;
