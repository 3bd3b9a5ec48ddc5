//! Aleph atomic broadcast, Quick-Aleph and the trustless randomness beacon,
//! together with a deterministic adversarial network simulator.

pub mod abcast;
pub mod acceptance;
pub mod beacon;
pub mod chdag;
pub mod consensus;
pub mod crypto;
pub mod netsim;
pub mod quicknet;
pub mod rbc;
pub mod wire;

/// Node index in `0..N`.
pub type NodeId = usize;
/// DAG round.
pub type Round = u32;
