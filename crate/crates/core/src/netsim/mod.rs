//! Deterministic simulation of the asynchronous network: atomic steps,
//! scheduling policies, async-round accounting, byzantine behaviors and the
//! fork-bomb generator.

mod rounds;
mod scheduler;
mod world;

pub mod config;
pub mod forkbomb;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::crypto::Hasher;

pub use config::{Behavior, BeaconKind, ByzantineSpec, ConfigError, SimConfig};
pub use rounds::{boundaries_from_trace, AsyncRoundTracker, TracedMessage};
pub use scheduler::{Scheduler, SchedulerKind};
pub use world::{Message, Outbox, Process, RunOutcome, SimError, SimWorld, StepInfo, Traffic};

/// Independent stream for (`seed`, `role`, `index`).
pub fn rng_for(seed: u64, role: &str, index: u64) -> ChaCha20Rng {
    let mut h = Hasher::new("rng-stream");
    h.u64(seed).part(role.as_bytes()).u64(index);
    ChaCha20Rng::from_seed(*h.finish().as_bytes())
}
