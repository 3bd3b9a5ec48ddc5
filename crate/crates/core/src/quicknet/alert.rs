//! Fork alerts and chain commitments.
//!
//! ```text
//! alert      := issuer:u32 | accused:u32 | id:u64 | unit1:bytes | unit2:bytes | commitment
//! commitment := 0:u8 | 1:u8 round:u32 digest
//! ```
//!
//! An alert travels as the payload of RBC instance `Alert { issuer, id }`.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::chdag::{ChDag, Unit, Validator};
use crate::crypto::Digest;
use crate::rbc::{InstanceId, PayloadCheck};
use crate::wire::{Reader, WireError, Writer};
use crate::{NodeId, Round};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlertMessage {
    pub issuer: NodeId,
    pub accused: NodeId,
    pub id: u64,
    pub proof: (Arc<Unit>, Arc<Unit>),
    /// Issuer's highest unit by the accused when the alert started.
    pub commitment: Option<(Round, Digest)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlertError {
    #[error("malformed alert: {0}")]
    Decode(#[from] WireError),
    #[error("proof units are not two variants of one (creator, round) by the accused")]
    NotAFork,
    #[error("bad signature in proof")]
    BadSignature,
    #[error("alert header does not match its instance")]
    Instance,
}

impl AlertMessage {
    pub fn instance(&self) -> InstanceId {
        InstanceId::Alert { issuer: self.issuer, id: self.id }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.index(self.issuer).index(self.accused).u64(self.id);
        w.bytes(self.proof.0.canonical_encode()).bytes(self.proof.1.canonical_encode());
        match &self.commitment {
            None => w.u8(0),
            Some((r, h)) => w.u8(1).u32(*r).digest(h),
        };
        w.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, AlertError> {
        let mut r = Reader::new(bytes);
        let issuer = r.index()?;
        let accused = r.index()?;
        let id = r.u64()?;
        let u1 = Arc::new(Unit::canonical_decode(r.bytes()?)?);
        let u2 = Arc::new(Unit::canonical_decode(r.bytes()?)?);
        let commitment = match r.u8()? {
            0 => None,
            1 => Some((r.u32()?, r.digest()?)),
            t => return Err(WireError::BadTag(t).into()),
        };
        r.finish()?;
        Ok(AlertMessage { issuer, accused, id, proof: (u1, u2), commitment })
    }

    /// The proof is two distinct, correctly signed units by the accused
    /// claiming the same round.
    pub fn verify_proof(&self, v: &Validator) -> Result<(), AlertError> {
        is_fork_proof(&self.proof.0, &self.proof.1, self.accused, v)
    }
}

pub fn is_fork_proof(a: &Unit, b: &Unit, accused: NodeId, v: &Validator) -> Result<(), AlertError> {
    if a.creator() != accused || b.creator() != accused || a.round() != b.round() || a.hash() == b.hash() {
        return Err(AlertError::NotAFork);
    }
    if v.check_context_free(a).is_err() || v.check_context_free(b).is_err() {
        return Err(AlertError::BadSignature);
    }
    Ok(())
}

/// Per-node alert state: known forkers, commitments, the own alert queue.
pub struct AlertBook {
    me: NodeId,
    /// Next alert id expected from each issuer.
    finished: Vec<u64>,
    forkers: BTreeSet<NodeId>,
    proofs: HashMap<NodeId, (Arc<Unit>, Arc<Unit>)>,
    /// Own commitment per accused, fixed when the fork was first learned.
    commitments: HashMap<NodeId, Option<(Round, Digest)>>,
    /// Hashes of forker units some other node committed to, closed downward
    /// as units arrive.
    allowed: HashMap<NodeId, HashSet<Digest>>,
    next_id: u64,
    active: Option<(u64, NodeId)>,
    queue: VecDeque<NodeId>,
    alerted: HashSet<NodeId>,
    /// Alert instances delivered, per accused node.
    instances: HashMap<NodeId, usize>,
}

impl AlertBook {
    pub fn new(me: NodeId, n: usize) -> Self {
        AlertBook {
            me,
            finished: vec![0; n],
            forkers: BTreeSet::new(),
            proofs: HashMap::new(),
            commitments: HashMap::new(),
            allowed: HashMap::new(),
            next_id: 0,
            active: None,
            queue: VecDeque::new(),
            alerted: HashSet::new(),
            instances: HashMap::new(),
        }
    }

    pub fn is_forker(&self, i: NodeId) -> bool {
        self.forkers.contains(&i)
    }

    pub fn forkers(&self) -> &BTreeSet<NodeId> {
        &self.forkers
    }

    /// True while the node's own alert is in flight.
    pub fn in_alert_mode(&self) -> bool {
        self.active.is_some()
    }

    pub fn allowed(&self, accused: NodeId) -> Option<&HashSet<Digest>> {
        self.allowed.get(&accused)
    }

    /// Extends the allowance for `accused` to `hashes`.
    pub fn allow(&mut self, accused: NodeId, hashes: impl IntoIterator<Item = Digest>) {
        self.allowed.entry(accused).or_default().extend(hashes);
    }

    pub fn instances_about(&self, accused: NodeId) -> usize {
        self.instances.get(&accused).copied().unwrap_or(0)
    }

    /// Records a proof; returns true if `accused` was not known before.
    /// The commitment is the highest unit by the accused in `dag` now,
    /// while its units there still form a single chain.
    pub fn on_proof(&mut self, accused: NodeId, a: Arc<Unit>, b: Arc<Unit>, dag: &ChDag) -> bool {
        if !self.forkers.insert(accused) {
            return false;
        }
        self.proofs.insert(accused, (a, b));
        let top = dag.top_round(accused).and_then(|r| dag.variants(accused, r).first().map(|&u| (r, dag.hash(u))));
        self.commitments.insert(accused, top);
        if self.alerted.insert(accused) {
            self.queue.push_back(accused);
        }
        true
    }

    /// The next own alert, if none is active.
    pub fn start_next(&mut self) -> Option<AlertMessage> {
        if self.active.is_some() {
            return None;
        }
        let accused = self.queue.pop_front()?;
        let proof = self.proofs.get(&accused)?.clone();
        let commitment = self.commitments.get(&accused).copied().flatten();
        let id = self.next_id;
        self.next_id += 1;
        self.active = Some((id, accused));
        Some(AlertMessage { issuer: self.me, accused, id, proof, commitment })
    }

    /// Rule 4: join `Alert(issuer, id)` only after the issuer's earlier
    /// alerts finished locally.
    pub fn may_participate(&self, id: &InstanceId) -> bool {
        match *id {
            InstanceId::Alert { issuer, id } => self.finished.get(issuer).is_some_and(|&f| f == id),
            _ => true,
        }
    }

    /// Validity of a reconstructed alert payload.
    pub fn check(&self, id: &InstanceId, bytes: &[u8], v: &Validator) -> PayloadCheck {
        let InstanceId::Alert { issuer, id } = *id else { return PayloadCheck::Invalid };
        let Ok(alert) = AlertMessage::decode(bytes) else { return PayloadCheck::Invalid };
        if alert.issuer != issuer || alert.id != id {
            return PayloadCheck::Invalid;
        }
        match self.finished.get(issuer) {
            Some(&f) if f == id => {}
            Some(&f) if f < id => return PayloadCheck::Wait,
            _ => return PayloadCheck::Invalid,
        }
        match alert.verify_proof(v) {
            Ok(()) => PayloadCheck::Valid,
            Err(_) => PayloadCheck::Invalid,
        }
    }

    /// Applies a delivered alert. Returns the commitment hash when it
    /// names a unit by another node's commitment that should be fetched.
    pub fn on_delivered(&mut self, alert: &AlertMessage, v: &Validator, dag: &ChDag) -> Option<Digest> {
        if let Some(f) = self.finished.get_mut(alert.issuer) {
            *f = (*f).max(alert.id + 1);
        }
        if alert.issuer == self.me && self.active.is_some_and(|(id, _)| id == alert.id) {
            self.active = None;
        }
        if alert.verify_proof(v).is_err() {
            return None;
        }
        *self.instances.entry(alert.accused).or_insert(0) += 1;
        self.on_proof(alert.accused, alert.proof.0.clone(), alert.proof.1.clone(), dag);
        let (_, h) = alert.commitment?;
        if alert.issuer == self.me {
            return None;
        }
        self.allowed.entry(alert.accused).or_default().insert(h);
        Some(h)
    }

    /// Rule 6 for a unit by a known forker: accept only units below a
    /// commitment. Accepting extends the allowance to the unit's parents.
    pub fn admit_forker_unit(&mut self, u: &Unit) -> bool {
        let Some(set) = self.allowed.get_mut(&u.creator()) else { return false };
        if !set.contains(&u.hash()) {
            return false;
        }
        set.extend(u.parents().iter().copied());
        true
    }
}
