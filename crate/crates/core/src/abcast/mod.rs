//! Atomic broadcast nodes and the scenario harness.

pub mod attack;
pub mod metrics;
pub mod node;
pub mod output;
pub mod scenario;
pub mod txbuf;

pub use node::{BeaconSetup, BombKit, HeadRecord, NetMessage, Node, NodeSetup, Records};
pub use output::{OutputEvent, OutputLog, PrefixFault};
pub use scenario::{Scenario, Summary};
pub use txbuf::{TxBuffer, TxId};
