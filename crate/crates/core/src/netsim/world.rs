//! The atomic-step world: one node per step reads its released messages,
//! computes to quiescence and sends.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use super::rounds::{AsyncRoundTracker, TracedMessage};
use super::scheduler::{Scheduler, SchedulerKind};
use super::rng_for;
use crate::NodeId;

pub trait Message: Clone {
    fn kind(&self) -> &'static str;
    fn wire_len(&self) -> usize;
}

/// Step context handed to a node.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub step: u64,
    pub async_round: u32,
}

pub struct Outbox<M> {
    items: Vec<(Option<NodeId>, M)>,
}

impl<M> Outbox<M> {
    fn new() -> Self {
        Outbox { items: Vec::new() }
    }

    pub fn send(&mut self, to: NodeId, m: M) {
        self.items.push((Some(to), m));
    }

    /// To every other node.
    pub fn multicast(&mut self, m: M) {
        self.items.push((None, m));
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub trait Process {
    type Msg: Message;
    fn step(&mut self, info: StepInfo, inbox: Vec<(NodeId, Self::Msg)>, out: &mut Outbox<Self::Msg>);
}

struct Envelope<M> {
    from: NodeId,
    msg: M,
    sent: u64,
    tag: Option<u32>,
    trace: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("message from {from} to {to} sent at step {sent} read at step {read}, beyond the fairness horizon {horizon}")]
    Fairness { from: NodeId, to: NodeId, sent: u64, read: u64, horizon: u64 },
}

/// Bytes and message counts sent per node, by message kind.
#[derive(Clone, Debug, Default)]
pub struct Traffic {
    pub bytes: Vec<BTreeMap<&'static str, u64>>,
    pub messages: Vec<BTreeMap<&'static str, u64>>,
}

impl Traffic {
    fn new(n: usize) -> Self {
        Traffic { bytes: vec![BTreeMap::new(); n], messages: vec![BTreeMap::new(); n] }
    }

    pub fn total_bytes(&self, node: NodeId) -> u64 {
        self.bytes[node].values().sum()
    }
}

pub struct SimWorld<P: Process> {
    pub nodes: Vec<P>,
    scheduler: Scheduler,
    crashed: Vec<bool>,
    step: u64,
    seq: u64,
    queues: Vec<BinaryHeap<Reverse<(u64, u64)>>>,
    held: BTreeMap<u64, (NodeId, Envelope<P::Msg>)>,
    tracker: AsyncRoundTracker,
    horizon: u64,
    max_delay_seen: u64,
    pub traffic: Traffic,
    trace: Option<(Vec<u64>, Vec<TracedMessage>)>,
}

/// How a bounded run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub steps: u64,
    pub reached: bool,
}

impl<P: Process> SimWorld<P> {
    pub fn new(nodes: Vec<P>, kind: SchedulerKind, crashed: Vec<bool>, seed: u64) -> Self {
        let n = nodes.len();
        assert_eq!(crashed.len(), n);
        let scheduler = Scheduler::new(kind, n, crashed.clone(), rng_for(seed, "scheduler", 0));
        let horizon = 50 * n as u64;
        SimWorld {
            nodes,
            tracker: AsyncRoundTracker::new(crashed.iter().map(|c| !c).collect()),
            scheduler,
            crashed,
            step: 0,
            seq: 0,
            queues: (0..n).map(|_| BinaryHeap::new()).collect(),
            held: BTreeMap::new(),
            horizon,
            max_delay_seen: 0,
            traffic: Traffic::new(n),
            trace: None,
        }
    }

    /// Fairness horizon in steps; defaults to 50·N.
    pub fn with_horizon(mut self, h: u64) -> Self {
        self.horizon = h;
        self
    }

    /// Keeps a full message trace for the brute-force round check.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some((vec![u64::MAX; self.nodes.len()], Vec::new()));
        self
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn async_round(&self) -> u32 {
        self.tracker.current()
    }

    pub fn tracker(&self) -> &AsyncRoundTracker {
        &self.tracker
    }

    pub fn is_crashed(&self, i: NodeId) -> bool {
        self.crashed[i]
    }

    pub fn max_delay_seen(&self) -> u64 {
        self.max_delay_seen
    }

    pub fn pending(&self) -> usize {
        self.held.len()
    }

    pub fn info(&self) -> StepInfo {
        StepInfo { step: self.step, async_round: self.tracker.current() }
    }

    /// First-action steps and message records, if tracing.
    pub fn trace(&self) -> Option<(&[u64], &[TracedMessage])> {
        self.trace.as_ref().map(|(a, m)| (a.as_slice(), m.as_slice()))
    }

    fn enqueue(&mut self, from: NodeId, to: NodeId, msg: P::Msg) {
        let n = self.n();
        if to >= n || to == from {
            return;
        }
        let kind = msg.kind();
        *self.traffic.bytes[from].entry(kind).or_insert(0) += msg.wire_len() as u64;
        *self.traffic.messages[from].entry(kind).or_insert(0) += 1;
        if self.crashed[to] {
            return;
        }
        let release = self.scheduler.release(self.step, from);
        let tag = Some(self.tracker.on_send());
        let trace = self.trace.as_mut().map(|(_, msgs)| {
            msgs.push(TracedMessage { sent: self.step, read: None });
            msgs.len() - 1
        });
        self.seq += 1;
        self.queues[to].push(Reverse((release, self.seq)));
        self.held.insert(self.seq, (to, Envelope { from, msg, sent: self.step, tag, trace }));
    }

    /// One atomic step.
    pub fn step(&mut self) -> Result<NodeId, SimError> {
        self.step += 1;
        let now = self.step;
        let i = self.scheduler.next_node();
        let mut inbox = Vec::new();
        while let Some(&Reverse((release, seq))) = self.queues[i].peek() {
            if release > now {
                break;
            }
            self.queues[i].pop();
            let (_, env) = self.held.remove(&seq).expect("queued envelope");
            let delay = now - env.sent;
            self.max_delay_seen = self.max_delay_seen.max(delay);
            if delay > self.horizon {
                return Err(SimError::Fairness { from: env.from, to: i, sent: env.sent, read: now, horizon: self.horizon });
            }
            if let Some(t) = env.tag {
                self.tracker.on_read(t);
            }
            if let (Some((_, msgs)), Some(k)) = (&mut self.trace, env.trace) {
                msgs[k].read = Some(now);
            }
            inbox.push((env.from, env.msg));
        }
        if let Some((first, _)) = &mut self.trace {
            first[i] = first[i].min(now);
        }
        let info = StepInfo { step: now, async_round: self.tracker.current() };
        let mut out = Outbox::new();
        self.nodes[i].step(info, inbox, &mut out);
        for (to, m) in out.items {
            match to {
                Some(j) => self.enqueue(i, j, m),
                None => {
                    for j in 0..self.n() {
                        if j != i {
                            self.enqueue(i, j, m.clone());
                        }
                    }
                }
            }
        }
        self.tracker.end_step(now, i);
        Ok(i)
    }

    /// Steps until `done` holds (checked before every step) or `max_steps`
    /// steps have run.
    pub fn run_until(&mut self, max_steps: u64, mut done: impl FnMut(&Self) -> bool) -> Result<RunOutcome, SimError> {
        let start = self.step;
        while self.step - start < max_steps {
            if done(self) {
                return Ok(RunOutcome { steps: self.step - start, reached: true });
            }
            self.step()?;
        }
        Ok(RunOutcome { steps: self.step - start, reached: done(self) })
    }
}
