//! Asynchronous-round accounting.
//!
//! l_0 is the first step by which every live node has acted. For i ≥ 1,
//! l_i = max(l_{i−1} + 1, step at which the last message sent during round
//! i−1 is read). Round i spans steps (l_{i−1}, l_i].

use std::collections::HashMap;

pub struct AsyncRoundTracker {
    live: Vec<bool>,
    acted: Vec<bool>,
    waiting: usize,
    current: u32,
    boundaries: Vec<u64>,
    outstanding: HashMap<u32, usize>,
}

impl AsyncRoundTracker {
    pub fn new(live: Vec<bool>) -> Self {
        let waiting = live.iter().filter(|&&x| x).count();
        AsyncRoundTracker {
            acted: vec![false; live.len()],
            live,
            waiting,
            current: 0,
            boundaries: Vec::new(),
            outstanding: HashMap::new(),
        }
    }

    /// The round in progress.
    pub fn current(&self) -> u32 {
        self.current
    }

    /// l_0, l_1, … so far.
    pub fn boundaries(&self) -> &[u64] {
        &self.boundaries
    }

    /// Async round containing `step`, if that round has closed or is open.
    pub fn round_of_step(&self, step: u64) -> u32 {
        self.boundaries.partition_point(|&l| l < step) as u32
    }

    pub fn is_live(&self, node: usize) -> bool {
        self.live[node]
    }

    /// A message to a live node was sent now; returns its round tag.
    pub fn on_send(&mut self) -> u32 {
        *self.outstanding.entry(self.current).or_insert(0) += 1;
        self.current
    }

    pub fn on_read(&mut self, tag: u32) {
        let c = self.outstanding.get_mut(&tag).expect("tracked message");
        *c -= 1;
        if *c == 0 {
            self.outstanding.remove(&tag);
        }
    }

    /// End of `step`, in which `node` acted.
    pub fn end_step(&mut self, step: u64, node: usize) {
        if self.current == 0 {
            if self.live[node] && !self.acted[node] {
                self.acted[node] = true;
                self.waiting -= 1;
            }
            if self.waiting == 0 {
                self.boundaries.push(step);
                self.current = 1;
            }
            return;
        }
        let prev = self.current - 1;
        let last = self.boundaries[prev as usize];
        if step > last && !self.outstanding.contains_key(&prev) {
            self.boundaries.push(step);
            self.current += 1;
        }
    }
}

/// One message in a full trace, for the brute-force recomputation.
#[derive(Clone, Copy, Debug)]
pub struct TracedMessage {
    pub sent: u64,
    pub read: Option<u64>,
}

/// Recomputes the boundaries from first-action steps of the live nodes and
/// every message to a live node, straight from the definition.
pub fn boundaries_from_trace(first_actions: &[u64], messages: &[TracedMessage], last_step: u64) -> Vec<u64> {
    let Some(&l0) = first_actions.iter().max() else { return vec![] };
    if l0 > last_step {
        return vec![];
    }
    let mut out = vec![l0];
    let mut lo = 0u64;
    loop {
        let hi = *out.last().unwrap();
        let mut li = hi + 1;
        let mut complete = true;
        for m in messages.iter().filter(|m| m.sent > lo && m.sent <= hi) {
            match m.read {
                Some(r) => li = li.max(r),
                None => complete = false,
            }
        }
        if !complete || li > last_step {
            return out;
        }
        out.push(li);
        lo = hi;
    }
}
