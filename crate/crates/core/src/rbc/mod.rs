//! Reliable broadcast of units (and alerts) with (f+1, N) erasure coding
//! and Merkle commitments.

pub mod engine;
pub mod erasure;
pub mod merkle;
pub mod message;

pub use engine::{check_size, proposals, PayloadCheck, RbcEngine, RbcHost, RbcOut};
pub use erasure::Code;
pub use message::{InstanceId, RbcBody, RbcMessage};
