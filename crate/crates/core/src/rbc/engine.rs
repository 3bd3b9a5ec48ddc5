//! Per-node state machines for all broadcast instances.
//!
//! Messages a node sends to itself are applied inline; the outbox holds
//! only traffic for other nodes. "Wait" steps park the instance and are
//! re-examined by [`RbcEngine::retry`] whenever the host's dag grows.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::erasure::Code;
use super::merkle::{self, MerkleTree};
use super::message::{InstanceId, RbcBody, RbcMessage};
use crate::crypto::Digest;
use crate::NodeId;

/// Result of the host's check on reconstructed bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PayloadCheck {
    Valid,
    /// Parents (or other prerequisites) are not local yet.
    Wait,
    Invalid,
}

/// What the engine needs from the owning node.
pub trait RbcHost {
    /// Size gate applied to an incoming proposal share.
    fn admit_share(&self, id: &InstanceId, share_len: usize) -> bool;
    /// Whether the node may prevote now (unit instances wait for dag round r−1).
    fn may_prevote(&self, id: &InstanceId) -> bool;
    /// Validity of the reconstructed bytes.
    fn check_payload(&mut self, id: &InstanceId, bytes: &[u8]) -> PayloadCheck;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RbcOut {
    Send(NodeId, RbcMessage),
    Multicast(RbcMessage),
    Deliver { id: InstanceId, root: Digest, bytes: Vec<u8> },
}

#[derive(Default)]
struct Instance {
    proposal_seen: bool,
    parked_prevote: Option<RbcMessage>,
    prevoted: bool,
    prevote_senders: HashSet<NodeId>,
    shares: HashMap<Digest, Vec<(usize, Vec<u8>)>>,
    candidate: Option<(Digest, Vec<u8>)>,
    validation_done: bool,
    commit_sent: bool,
    commit_senders: HashSet<NodeId>,
    commits: HashMap<Digest, usize>,
    output_root: Option<Digest>,
    delivered: bool,
}

pub struct RbcEngine {
    me: NodeId,
    n: usize,
    f: usize,
    code: Code,
    instances: HashMap<InstanceId, Instance>,
    parked_prevotes: BTreeSet<InstanceId>,
    parked_checks: BTreeSet<InstanceId>,
    outbox: Vec<RbcOut>,
}

impl RbcEngine {
    pub fn new(me: NodeId, n: usize) -> Self {
        let f = (n - 1) / 3;
        RbcEngine {
            me,
            n,
            f,
            code: Code::new(f + 1, n),
            instances: HashMap::new(),
            parked_prevotes: BTreeSet::new(),
            parked_checks: BTreeSet::new(),
            outbox: Vec::new(),
        }
    }

    pub fn code(&self) -> Code {
        self.code
    }

    pub fn take_outbox(&mut self) -> Vec<RbcOut> {
        std::mem::take(&mut self.outbox)
    }

    pub fn has_delivered(&self, id: &InstanceId) -> bool {
        self.instances.get(id).is_some_and(|i| i.delivered)
    }

    pub fn has_proposal(&self, id: &InstanceId) -> bool {
        self.instances.get(id).is_some_and(|i| i.proposal_seen)
    }

    /// Builds the n proposals for `bytes`; the proposer's own share is
    /// processed inline. Returns the Merkle root.
    pub fn propose(&mut self, id: InstanceId, bytes: &[u8], host: &mut dyn RbcHost) -> Digest {
        let (root, msgs) = proposals(self.code, id, bytes);
        for (j, m) in msgs.into_iter().enumerate() {
            if j == self.me {
                self.handle(self.me, m, host);
            } else {
                self.outbox.push(RbcOut::Send(j, m));
            }
        }
        root
    }

    /// Sends an arbitrary (possibly inconsistent) proposal set; used by
    /// byzantine controllers.
    pub fn propose_raw(&mut self, msgs: Vec<(NodeId, RbcMessage)>, host: &mut dyn RbcHost) {
        for (j, m) in msgs {
            if j == self.me {
                self.handle(self.me, m, host);
            } else {
                self.outbox.push(RbcOut::Send(j, m));
            }
        }
    }

    pub fn handle(&mut self, from: NodeId, msg: RbcMessage, host: &mut dyn RbcHost) {
        let id = msg.instance;
        match msg.body {
            RbcBody::Propose { branch, share } => self.on_propose(from, id, msg.root, branch, share, host),
            RbcBody::Prevote { branch, share } => self.on_prevote(from, id, msg.root, branch, share, host),
            RbcBody::Commit => self.on_commit(from, id, msg.root, host),
        }
    }

    /// Re-examines parked waits after the host's state changed.
    pub fn retry(&mut self, host: &mut dyn RbcHost) {
        let ready: Vec<InstanceId> = self.parked_prevotes.iter().copied().filter(|id| host.may_prevote(id)).collect();
        for id in ready {
            self.parked_prevotes.remove(&id);
            let msg = self.instances.get_mut(&id).and_then(|i| i.parked_prevote.take());
            if let Some(m) = msg {
                self.send_prevote(id, m, host);
            }
        }
        let checks: Vec<InstanceId> = self.parked_checks.iter().copied().collect();
        for id in checks {
            self.run_check(id, host);
        }
    }

    fn on_propose(
        &mut self,
        from: NodeId,
        id: InstanceId,
        root: Digest,
        branch: Vec<crate::crypto::Digest>,
        share: Vec<u8>,
        host: &mut dyn RbcHost,
    ) {
        if from != id.proposer() {
            return;
        }
        let inst = self.instances.entry(id).or_default();
        if inst.proposal_seen {
            return;
        }
        inst.proposal_seen = true;
        if !host.admit_share(&id, share.len()) {
            return;
        }
        if !merkle::verify(&root, self.n, self.me, &share, &branch) {
            return;
        }
        let prevote = RbcMessage { instance: id, root, body: RbcBody::Prevote { branch, share } };
        if host.may_prevote(&id) {
            self.send_prevote(id, prevote, host);
        } else {
            inst.parked_prevote = Some(prevote);
            self.parked_prevotes.insert(id);
        }
    }

    fn send_prevote(&mut self, id: InstanceId, msg: RbcMessage, host: &mut dyn RbcHost) {
        let inst = self.instances.entry(id).or_default();
        if inst.prevoted {
            return;
        }
        inst.prevoted = true;
        self.outbox.push(RbcOut::Multicast(msg.clone()));
        self.handle(self.me, msg, host);
    }

    fn on_prevote(
        &mut self,
        from: NodeId,
        id: InstanceId,
        root: Digest,
        branch: Vec<Digest>,
        share: Vec<u8>,
        host: &mut dyn RbcHost,
    ) {
        if from >= self.n || !merkle::verify(&root, self.n, from, &share, &branch) {
            return;
        }
        let quorum = 2 * self.f + 1;
        let inst = self.instances.entry(id).or_default();
        if !inst.prevote_senders.insert(from) {
            return;
        }
        let tally = inst.shares.entry(root).or_default();
        tally.push((from, share));
        let count = tally.len();
        if count >= quorum && inst.candidate.is_none() && !inst.validation_done && !inst.commit_sent {
            let shares: Vec<(usize, &[u8])> = tally.iter().map(|(i, s)| (*i, s.as_slice())).collect();
            let consistent = self
                .code
                .reconstruct_all(&shares)
                .ok()
                .filter(|all| merkle::root_of(all) == root)
                .and_then(|_| self.code.decode(&shares).ok());
            match consistent {
                Some(bytes) => {
                    inst.candidate = Some((root, bytes));
                    self.run_check(id, host);
                }
                None => inst.validation_done = true,
            }
        }
        self.try_deliver(id);
    }

    fn run_check(&mut self, id: InstanceId, host: &mut dyn RbcHost) {
        let Some(inst) = self.instances.get_mut(&id) else { return };
        let Some((root, bytes)) = inst.candidate.as_ref() else {
            self.parked_checks.remove(&id);
            return;
        };
        let root = *root;
        match host.check_payload(&id, bytes) {
            PayloadCheck::Wait => {
                self.parked_checks.insert(id);
            }
            verdict => {
                self.parked_checks.remove(&id);
                inst.validation_done = true;
                inst.candidate = None;
                if verdict == PayloadCheck::Valid {
                    self.send_commit(id, root, host);
                }
            }
        }
    }

    fn send_commit(&mut self, id: InstanceId, root: Digest, host: &mut dyn RbcHost) {
        let inst = self.instances.entry(id).or_default();
        if inst.commit_sent {
            return;
        }
        inst.commit_sent = true;
        let msg = RbcMessage { instance: id, root, body: RbcBody::Commit };
        self.outbox.push(RbcOut::Multicast(msg));
        self.on_commit(self.me, id, root, host);
    }

    fn on_commit(&mut self, from: NodeId, id: InstanceId, root: Digest, host: &mut dyn RbcHost) {
        if from >= self.n {
            return;
        }
        let inst = self.instances.entry(id).or_default();
        if !inst.commit_senders.insert(from) {
            return;
        }
        let c = inst.commits.entry(root).or_insert(0);
        *c += 1;
        let count = *c;
        if count >= 2 * self.f + 1 && inst.output_root.is_none() {
            inst.output_root = Some(root);
        }
        if count > self.f && !inst.commit_sent {
            self.send_commit(id, root, host);
        }
        self.try_deliver(id);
    }

    fn try_deliver(&mut self, id: InstanceId) {
        let Some(inst) = self.instances.get_mut(&id) else { return };
        if inst.delivered {
            return;
        }
        let Some(root) = inst.output_root else { return };
        let Some(tally) = inst.shares.get(&root) else { return };
        if tally.len() <= self.f {
            return;
        }
        let shares: Vec<(usize, &[u8])> = tally.iter().map(|(i, s)| (*i, s.as_slice())).collect();
        if let Ok(bytes) = self.code.decode(&shares) {
            inst.delivered = true;
            inst.shares.clear();
            inst.candidate = None;
            self.parked_checks.remove(&id);
            self.outbox.push(RbcOut::Deliver { id, root, bytes });
        }
    }
}

/// The n propose messages for `bytes` and their common root.
pub fn proposals(code: Code, id: InstanceId, bytes: &[u8]) -> (Digest, Vec<RbcMessage>) {
    let shards = code.encode(bytes);
    let tree = MerkleTree::build(&shards);
    let root = tree.root();
    let msgs = shards
        .into_iter()
        .enumerate()
        .map(|(j, share)| RbcMessage { instance: id, root, body: RbcBody::Propose { branch: tree.branch(j), share } })
        .collect();
    (root, msgs)
}

/// Inferred transaction count from a share and the gate T ≤ C_B · batch.
pub fn check_size(t: usize, c_b: usize, own_batch: usize) -> bool {
    t <= c_b.saturating_mul(own_batch)
}
