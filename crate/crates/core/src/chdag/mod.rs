//! The communication-history dag: units, rounds, the causal order,
//! validity, insertion and unit creation.

pub mod create;
pub mod dag;
pub mod dump;
pub mod fixtures;
pub mod staging;
pub mod unit;
pub mod validate;

pub use create::{choose_parents, create_unit, ready_to_create, NotReady};
pub use dag::{ChDag, Inserted, UnitIdx};
pub use staging::{Admit, Staging};
pub use unit::{MultiShare, Payload, Transaction, Unit, UnitCoords};
pub use validate::{PayloadRules, Validator, Violation};

use crate::crypto::Digest;
use crate::{NodeId, Round};

/// How units spread: reliable broadcast (fork-free) or multicast with gossip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DagMode {
    Rbc,
    Quick,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DagError {
    #[error("{} parents missing", .0.len())]
    Dangling(Vec<Digest>),
    #[error("unknown creator {0}")]
    UnknownCreator(NodeId),
    #[error("fork by {creator} at round {round}")]
    Fork { creator: NodeId, round: Round },
}
