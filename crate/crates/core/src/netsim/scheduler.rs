//! Message scheduling policies.
//!
//! Every policy steps nodes in batches of N (a fresh random permutation per
//! batch, or fixed order for the synchronous policy) and decides each
//! message's release step when it is sent. A stepped node reads everything
//! released to it so far.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SchedulerKind {
    /// Delay uniform in [1, 2N].
    FairRandom,
    /// Messages sent in one batch of N steps are read in the next.
    Synchronous,
    /// A rotating set of `slow` senders has its messages held for the
    /// maximum delay; the rest travel as under `FairRandom`.
    AdversarialDelay { slow: usize, max_delay: Option<u64> },
}

impl SchedulerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerKind::FairRandom => "fair",
            SchedulerKind::Synchronous => "synchronous",
            SchedulerKind::AdversarialDelay { .. } => "adversarial",
        }
    }
}

pub struct Scheduler {
    kind: SchedulerKind,
    n: usize,
    rng: ChaCha20Rng,
    skip: Vec<bool>,
    batch: Vec<NodeId>,
    pos: usize,
    slow: Vec<NodeId>,
    slow_until: u64,
}

impl Scheduler {
    /// `skip` marks crashed nodes, which are never stepped.
    pub fn new(kind: SchedulerKind, n: usize, skip: Vec<bool>, rng: ChaCha20Rng) -> Self {
        Scheduler { kind, n, rng, skip, batch: Vec::new(), pos: 0, slow: Vec::new(), slow_until: 0 }
    }

    pub fn kind(&self) -> &SchedulerKind {
        &self.kind
    }

    /// Largest delay this policy ever assigns.
    pub fn max_delay(&self) -> u64 {
        let n = self.n as u64;
        match self.kind {
            SchedulerKind::FairRandom => 2 * n,
            SchedulerKind::Synchronous => 2 * n,
            SchedulerKind::AdversarialDelay { max_delay, .. } => max_delay.unwrap_or(48 * n),
        }
    }

    /// Node to step next.
    pub fn next_node(&mut self) -> NodeId {
        if self.pos == self.batch.len() {
            self.batch = (0..self.n).filter(|&i| !self.skip[i]).collect();
            if self.kind != SchedulerKind::Synchronous {
                self.batch.shuffle(&mut self.rng);
            }
            self.pos = 0;
        }
        self.pos += 1;
        self.batch[self.pos - 1]
    }

    /// Release step for a message sent at `step` by `from`.
    pub fn release(&mut self, step: u64, from: NodeId) -> u64 {
        let n = self.n as u64;
        match self.kind {
            SchedulerKind::FairRandom => step + self.rng.gen_range(1..=2 * n),
            SchedulerKind::Synchronous => {
                // Batches are steps [bN+1, (b+1)N]; release at the next batch.
                let live = self.skip.iter().filter(|&&s| !s).count() as u64;
                let b = (step - 1) / live;
                (b + 1) * live + 1
            }
            SchedulerKind::AdversarialDelay { slow, .. } => {
                if step >= self.slow_until {
                    let mut all: Vec<NodeId> = (0..self.n).collect();
                    all.shuffle(&mut self.rng);
                    self.slow = all.into_iter().take(slow).collect();
                    self.slow_until = step + 10 * n;
                }
                if self.slow.contains(&from) {
                    step + self.max_delay()
                } else {
                    step + self.rng.gen_range(1..=2 * n)
                }
            }
        }
    }
}
