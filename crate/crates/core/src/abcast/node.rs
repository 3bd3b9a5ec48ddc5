//! One simulated node: dissemination, dag maintenance, ordering, output,
//! beacon and byzantine behaviors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::output::OutputLog;
use super::txbuf::{TxBuffer, TxId};
use crate::beacon::dealer::coin_nonce;
use crate::beacon::multicoin::{CombinedKeys, MultiCoinNode, SetupCache, TrustlessConfig, SET_ROUND};
use crate::beacon::toss::{toss_share, TossCollector};
use crate::beacon::dealer::DealerCoin;
use crate::beacon::Lagrange;
use crate::chdag::{Admit, ChDag, DagMode, Payload, Staging, Transaction, Unit, UnitIdx, Validator};
use crate::consensus::{ConsensusMode, Orderer, SafetyFault, SecretSource, UnitDecision, Voting};
use crate::crypto::{create_share_on, Digest, GroupBackend, Scalar, SignatureShare, SigningKey, ThresholdKeySet};
use crate::netsim::forkbomb::ForkBombPlan;
use crate::netsim::{Behavior, Message, Outbox, Process, StepInfo};
use crate::quicknet::{
    peer_has_more, resolve_parents, units_peer_lacks, AlertBook, AlertMessage, AntiSpam, CompactUnit, ConciseInfo,
    Resolved,
};
use crate::rbc::{check_size, proposals, InstanceId, PayloadCheck, RbcEngine, RbcHost, RbcMessage, RbcOut};
use crate::wire::Writer;
use crate::{NodeId, Round};

#[derive(Clone, Debug)]
pub enum NetMessage {
    Rbc(RbcMessage),
    Compact(Arc<CompactUnit>),
    Units(Vec<Arc<Unit>>),
    Info { info: Arc<ConciseInfo>, reply: bool },
    Request(Vec<Digest>),
    RequestCoords(NodeId, Round),
    TossShare(u64, SignatureShare),
}

impl Message for NetMessage {
    fn kind(&self) -> &'static str {
        match self {
            NetMessage::Rbc(m) => match m.instance {
                InstanceId::Unit { .. } => m.kind(),
                InstanceId::Alert { .. } => "alert",
            },
            NetMessage::Compact(_) => "unit",
            NetMessage::Units(_) => "units",
            NetMessage::Info { .. } => "info",
            NetMessage::Request(_) | NetMessage::RequestCoords(..) => "request",
            NetMessage::TossShare(..) => "toss",
        }
    }

    fn wire_len(&self) -> usize {
        1 + match self {
            NetMessage::Rbc(m) => m.encoded_len(),
            NetMessage::Compact(c) => c.wire_len(),
            NetMessage::Units(us) => 4 + us.iter().map(|u| 4 + u.encoded_len()).sum::<usize>(),
            NetMessage::Info { info, .. } => 1 + info.wire_len(),
            NetMessage::Request(hs) => 4 + 32 * hs.len(),
            NetMessage::RequestCoords(..) => 8,
            NetMessage::TossShare(_, s) => {
                let mut w = Writer::new();
                w.u64(0).share(s);
                w.len()
            }
        }
    }
}

pub enum BeaconSetup {
    /// This node's view of the dealt keys (its own tossing key only).
    Dealer(ThresholdKeySet),
    Trustless { cfg: Arc<TrustlessConfig>, cache: Arc<SetupCache>, secret_keys: Vec<Scalar> },
}

enum Beacon {
    Dealer(DealerCoin),
    Trustless(Box<MultiCoinNode>),
}

impl SecretSource for Beacon {
    fn secret_bits(&mut self, i: NodeId, r: Round, dag: &ChDag) -> Option<Digest> {
        match self {
            Beacon::Dealer(c) => c.secret_bits(i, r, dag),
            Beacon::Trustless(m) => m.secret_bits(i, r, dag),
        }
    }
}

/// Everything the fork-bomb coordinator holds about its accomplices.
pub struct BombKit {
    pub plan: ForkBombPlan,
    pub keys: BTreeMap<NodeId, SigningKey>,
    pub coin_keys: BTreeMap<NodeId, Scalar>,
}

pub struct NodeSetup {
    pub me: NodeId,
    pub n: usize,
    pub mode: ConsensusMode,
    pub backend: Arc<GroupBackend>,
    pub sk: SigningKey,
    pub validator: Validator,
    pub beacon: BeaconSetup,
    pub behaviors: Vec<Behavior>,
    pub weakened: bool,
    pub c_b: usize,
    pub rng: ChaCha20Rng,
    pub audit: bool,
    pub snapshots: bool,
    /// Evaluate `ChooseHead(r)` for every open round on each growth, not
    /// only the next one in order.
    pub probe_heads: bool,
    /// Last round this node creates a regular unit in (fork-bomb pairs).
    pub stop_after: Option<Round>,
    pub bomb: Option<BombKit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeadRecord {
    pub round: Round,
    pub head: Digest,
    pub height: Round,
    pub async_round: u32,
}

#[derive(Default)]
pub struct Records {
    pub heads: Vec<HeadRecord>,
    /// Async round of each output position.
    pub output_rounds: Vec<u32>,
    /// Own unit rounds and the async round they were created in.
    pub created: BTreeMap<Round, u32>,
    /// Unit RBC deliveries: (creator, round) → (hash, async round).
    pub delivered: HashMap<(NodeId, Round), (Digest, u32)>,
    /// (async round, height) whenever the height grows.
    pub heights: Vec<(u32, Round)>,
    /// Round-r units present when the height first reached r+4.
    pub snapshots: Option<BTreeMap<Round, HashSet<Digest>>>,
    pub toss_requested: BTreeMap<u64, u32>,
    pub toss_outputs: BTreeMap<u64, (Digest, u32)>,
    pub setup_done: Option<u32>,
    pub combined: Option<CombinedKeys>,
    pub faults: Vec<String>,
    pub rejected: usize,
    pub dropped_forker_units: usize,
    pub alerts_started: usize,
    pub bomb_launched: Option<u32>,
    /// Every unit of the bomb, on the coordinator.
    pub bomb_units: Vec<Digest>,
    /// (height, units held in dag and staging) whenever the height grows.
    pub sizes: Vec<(Round, usize)>,
    /// Round → dag height at which `ChooseHead(round)` first succeeded.
    pub head_ready: BTreeMap<Round, Round>,
}

struct QuickState {
    alerts: AlertBook,
    /// First variant seen per (creator, round), signature-checked.
    seen: HashMap<(NodeId, Round), Arc<Unit>>,
    spam: AntiSpam,
}

#[derive(Default)]
struct Flags {
    variants: usize,
    withhold: bool,
    garbage: bool,
    byzantine: bool,
}

/// Allowance for non-transaction payload (parents, beacon data) in the
/// RBC size gate.
fn size_allowance(n: usize) -> usize {
    4096 + 256 * n
}

const TX_ESTIMATE: usize = 64;

struct Host<'a> {
    dag: &'a ChDag,
    validator: &'a Validator,
    alerts: Option<&'a AlertBook>,
    f: usize,
    c_b: usize,
    batch: usize,
    allowance: usize,
    prevalidated: &'a mut HashSet<Digest>,
}

impl RbcHost for Host<'_> {
    fn admit_share(&self, id: &InstanceId, share_len: usize) -> bool {
        match id {
            InstanceId::Unit { .. } => {
                let t = (share_len * (self.f + 1)).saturating_sub(self.allowance);
                check_size(t, self.c_b, self.batch)
            }
            InstanceId::Alert { .. } => self.alerts.is_some(),
        }
    }

    fn may_prevote(&self, id: &InstanceId) -> bool {
        match id {
            InstanceId::Unit { round, .. } => self.dag.height_i64() >= *round as i64 - 1,
            InstanceId::Alert { .. } => self.alerts.is_some_and(|a| a.may_participate(id)),
        }
    }

    fn check_payload(&mut self, id: &InstanceId, bytes: &[u8]) -> PayloadCheck {
        match *id {
            InstanceId::Unit { proposer, round } => {
                if self.alerts.is_some() {
                    return PayloadCheck::Invalid;
                }
                let Ok(u) = Unit::canonical_decode(bytes) else { return PayloadCheck::Invalid };
                if u.creator() != proposer || u.round() != round {
                    return PayloadCheck::Invalid;
                }
                if self.validator.check_context_free(&u).is_err() {
                    return PayloadCheck::Invalid;
                }
                if u.parents().iter().any(|p| !self.dag.contains(p)) {
                    return PayloadCheck::Wait;
                }
                match self.validator.validate_structure(&u, self.dag, true) {
                    Ok(_) => {
                        self.prevalidated.insert(u.hash());
                        PayloadCheck::Valid
                    }
                    Err(_) => PayloadCheck::Invalid,
                }
            }
            InstanceId::Alert { .. } => match self.alerts {
                Some(a) => a.check(id, bytes, self.validator),
                None => PayloadCheck::Invalid,
            },
        }
    }
}

pub struct Node {
    pub me: NodeId,
    n: usize,
    f: usize,
    mode: ConsensusMode,
    backend: Arc<GroupBackend>,
    sk: SigningKey,
    validator: Validator,
    rng: ChaCha20Rng,
    pub dag: ChDag,
    staging: Staging,
    orderer: Orderer,
    beacon: Beacon,
    rbc: RbcEngine,
    quick: Option<QuickState>,
    weakened: bool,
    pub txbuf: TxBuffer,
    pub log: OutputLog,
    next_round: Round,
    stop_after: Option<Round>,
    flags: Flags,
    c_b: usize,
    prevalidated: HashSet<Digest>,
    grew: bool,
    /// Set while the inbox of the current step is being read.
    reading: bool,
    toss_keys: Option<ThresholdKeySet>,
    tosses: BTreeMap<u64, TossCollector>,
    toss_queue: Vec<u64>,
    toss_inbox: Vec<(u64, SignatureShare)>,
    lagrange: Lagrange,
    bomb: Option<BombKit>,
    probe_heads: bool,
    now: StepInfo,
    pub rec: Records,
}

impl Node {
    pub fn new(s: NodeSetup) -> Self {
        let dag_mode = match s.mode {
            ConsensusMode::Aleph => DagMode::Rbc,
            ConsensusMode::Quick => DagMode::Quick,
        };
        let mut flags = Flags { variants: 1, ..Flags::default() };
        for b in &s.behaviors {
            flags.byzantine = true;
            match b {
                Behavior::Forker { variants } => flags.variants = (*variants).max(1),
                Behavior::EquivocatingProposer => {
                    flags.variants = if s.mode == ConsensusMode::Aleph { s.n } else { 2 };
                }
                Behavior::ShareWithholder => flags.withhold = true,
                Behavior::GarbageDealer => flags.garbage = true,
                Behavior::Crash | Behavior::ForkBomb { .. } => {}
            }
        }
        let (beacon, toss_keys, start) = match s.beacon {
            BeaconSetup::Dealer(keys) => (Beacon::Dealer(DealerCoin::new(s.backend.clone(), &keys, s.me)), Some(keys), 0),
            BeaconSetup::Trustless { cfg, cache, secret_keys } => {
                (Beacon::Trustless(Box::new(MultiCoinNode::new(cfg, cache, s.me, secret_keys))), None, SET_ROUND)
            }
        };
        let quick = (s.mode == ConsensusMode::Quick).then(|| QuickState {
            alerts: AlertBook::new(s.me, s.n),
            seen: HashMap::new(),
            spam: AntiSpam::new(20 * s.n as u64, 3),
        });
        let mut rec = Records::default();
        if s.snapshots {
            rec.snapshots = Some(BTreeMap::new());
        }
        Node {
            me: s.me,
            n: s.n,
            f: (s.n - 1) / 3,
            mode: s.mode,
            lagrange: Lagrange::new(s.backend.clone()),
            backend: s.backend,
            sk: s.sk,
            validator: s.validator,
            rng: s.rng,
            dag: ChDag::new(s.n, dag_mode),
            staging: Staging::new(),
            orderer: Orderer::new(Voting::new(s.mode).with_audit(s.audit), start),
            beacon,
            rbc: RbcEngine::new(s.me, s.n),
            quick,
            weakened: s.weakened,
            txbuf: TxBuffer::new(),
            log: OutputLog::new(),
            next_round: 0,
            stop_after: s.stop_after,
            flags,
            c_b: s.c_b,
            prevalidated: HashSet::new(),
            grew: false,
            reading: false,
            toss_keys,
            tosses: BTreeMap::new(),
            toss_queue: Vec::new(),
            toss_inbox: Vec::new(),
            bomb: s.bomb,
            probe_heads: s.probe_heads,
            now: StepInfo { step: 0, async_round: 0 },
            rec,
        }
    }

    pub fn mode(&self) -> ConsensusMode {
        self.mode
    }

    pub fn is_byzantine(&self) -> bool {
        self.flags.byzantine
    }

    pub fn orderer(&self) -> &Orderer {
        &self.orderer
    }

    /// Ordered unit hashes so far.
    pub fn ordered_hashes(&self) -> Vec<Digest> {
        self.orderer.order().iter().map(|&u| self.dag.hash(u)).collect()
    }

    pub fn known_forkers(&self) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self.dag.forkers().iter().copied().collect();
        if let Some(q) = &self.quick {
            out.extend(q.alerts.forkers().iter().copied());
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn alert_book(&self) -> Option<&AlertBook> {
        self.quick.as_ref().map(|q| &q.alerts)
    }

    pub fn staged(&self) -> usize {
        self.staging.len()
    }

    /// Parents that staged units are waiting for.
    pub fn staging_missing(&self) -> Vec<Digest> {
        self.staging.missing(&self.dag)
    }

    /// Hands a transaction to this node.
    pub fn input_tx(&mut self, tx: Transaction) -> bool {
        self.txbuf.input_tx(tx)
    }

    /// Starts toss `m`; shares go out at the next step.
    pub fn request_toss(&mut self, m: u64, async_round: u32) {
        if self.rec.toss_requested.contains_key(&m) {
            return;
        }
        self.rec.toss_requested.insert(m, async_round);
        self.toss_queue.push(m);
    }

    pub fn toss_keys(&self) -> Option<&ThresholdKeySet> {
        self.toss_keys.as_ref()
    }

    /// `Decide(U)` with this node's beacon.
    pub fn decide(&mut self, u: UnitIdx) -> Result<Option<bool>, SafetyFault> {
        self.orderer.voting().decide(u, &self.dag, &mut self.beacon)
    }

    /// `UnitDecide(U0, U)` with this node's beacon.
    pub fn unit_decide(&mut self, u0: UnitIdx, u: UnitIdx) -> UnitDecision {
        self.orderer.voting().unit_decide(u0, u, &self.dag, &mut self.beacon)
    }

    fn hardened(&self) -> bool {
        self.quick.is_some() && !self.weakened && !self.flags.byzantine
    }

    fn banned(&self, j: NodeId) -> bool {
        self.hardened() && self.quick.as_ref().is_some_and(|q| q.alerts.is_forker(j))
    }

    fn skip_creator(&self, c: NodeId) -> bool {
        if c == self.me {
            return false;
        }
        self.dag.is_forker(c) || self.quick.as_ref().is_some_and(|q| q.alerts.is_forker(c))
    }

    fn batch_estimate(&self) -> usize {
        (self.txbuf.len() / self.n).max(1) * TX_ESTIMATE
    }

    fn settle(&mut self, out: &mut Outbox<NetMessage>) {
        loop {
            let items = self.rbc.take_outbox();
            let idle = items.is_empty();
            for it in items {
                match it {
                    RbcOut::Send(to, m) => out.send(to, NetMessage::Rbc(m)),
                    RbcOut::Multicast(m) => out.multicast(NetMessage::Rbc(m)),
                    RbcOut::Deliver { id, bytes, .. } => self.on_deliver(id, bytes, out),
                }
            }
            if self.grew {
                self.grew = false;
                self.update_order();
                let batch = self.batch_estimate();
                let mut host = Host {
                    dag: &self.dag,
                    validator: &self.validator,
                    alerts: self.quick.as_ref().map(|q| &q.alerts),
                    f: self.f,
                    c_b: self.c_b,
                    batch,
                    allowance: size_allowance(self.n),
                    prevalidated: &mut self.prevalidated,
                };
                self.rbc.retry(&mut host);
                self.try_create(out);
                continue;
            }
            if idle {
                break;
            }
        }
    }

    fn rbc_call(&mut self, f: impl FnOnce(&mut RbcEngine, &mut dyn RbcHost)) {
        let batch = self.batch_estimate();
        let mut host = Host {
            dag: &self.dag,
            validator: &self.validator,
            alerts: self.quick.as_ref().map(|q| &q.alerts),
            f: self.f,
            c_b: self.c_b,
            batch,
            allowance: size_allowance(self.n),
            prevalidated: &mut self.prevalidated,
        };
        f(&mut self.rbc, &mut host);
    }

    fn on_deliver(&mut self, id: InstanceId, bytes: Vec<u8>, out: &mut Outbox<NetMessage>) {
        match id {
            InstanceId::Unit { proposer, round } => {
                let Ok(u) = Unit::canonical_decode(&bytes) else { return };
                self.rec.delivered.insert((proposer, round), (u.hash(), self.now.async_round));
                self.admit(Arc::new(u), None, out);
            }
            InstanceId::Alert { .. } => {
                let Ok(alert) = AlertMessage::decode(&bytes) else { return };
                let Some(q) = self.quick.as_mut() else { return };
                if let Some(h) = q.alerts.on_delivered(&alert, &self.validator, &self.dag) {
                    if !self.dag.contains(&h) && alert.issuer != self.me {
                        out.send(alert.issuer, NetMessage::Request(vec![h]));
                    }
                }
                self.start_alert();
                self.grew = true;
            }
        }
    }

    fn start_alert(&mut self) {
        if !self.hardened() {
            return;
        }
        let Some(q) = self.quick.as_mut() else { return };
        if let Some(alert) = q.alerts.start_next() {
            self.rec.alerts_started += 1;
            let bytes = alert.encode();
            self.rbc_call(|rbc, host| {
                rbc.propose(alert.instance(), &bytes, host);
            });
        }
    }

    /// Quick-mode filters (forker rules, fork detection), then staging.
    fn accept_quick(&mut self, u: Arc<Unit>, from: NodeId, out: &mut Outbox<NetMessage>) {
        let h = u.hash();
        if self.dag.contains(&h) || self.staging.contains(&h) {
            return;
        }
        if self.validator.check_context_free(&u).is_err() {
            self.rec.rejected += 1;
            return;
        }
        if self.hardened() && u.creator() != self.me {
            let q = self.quick.as_mut().unwrap();
            let c = u.creator();
            if q.alerts.is_forker(c) {
                // A committed unit staged before detection still vouches for its parents.
                let allowed = q.alerts.allowed(c);
                let vouched = self.staging.dependents_of(&h).iter().any(|d| allowed.is_some_and(|a| a.contains(d)));
                if vouched {
                    q.alerts.allow(c, [h]);
                }
                if !q.alerts.admit_forker_unit(&u) {
                    self.rec.dropped_forker_units += 1;
                    return;
                }
            } else {
                match q.seen.get(&(c, u.round())) {
                    Some(first) if first.hash() != h => {
                        let first = first.clone();
                        q.alerts.on_proof(c, first, u, &self.dag);
                        self.rec.dropped_forker_units += 1;
                        self.start_alert();
                        return;
                    }
                    Some(_) => {}
                    None => {
                        q.seen.insert((c, u.round()), u.clone());
                    }
                }
            }
        }
        self.admit(u, Some(from), out);
    }

    fn admit(&mut self, u: Arc<Unit>, from: Option<NodeId>, out: &mut Outbox<NetMessage>) {
        match self.staging.admit(u.clone(), &self.dag) {
            Admit::Known => {}
            Admit::Ready(u) => self.insert_cascade(u),
            Admit::Staged => {
                if let (Some(j), true) = (from, self.quick.is_some()) {
                    let missing: Vec<Digest> = u
                        .parents()
                        .iter()
                        .filter(|p| !self.dag.contains(p) && !self.staging.contains(p))
                        .copied()
                        .collect();
                    if !missing.is_empty() {
                        out.send(j, NetMessage::Request(missing));
                    }
                }
            }
        }
    }

    fn insert_cascade(&mut self, u: Arc<Unit>) {
        let mut queue = vec![u];
        while let Some(u) = queue.pop() {
            let h = u.hash();
            let ok = if self.prevalidated.remove(&h) {
                true
            } else if self.quick.is_some() {
                // Signatures were checked on arrival.
                self.validator.validate_structure(&u, &self.dag, true).is_ok()
            } else {
                self.validator.validate(&u, &self.dag).is_ok()
            };
            if !ok {
                self.rec.rejected += 1;
                self.staging.discard(&h);
                continue;
            }
            match self.dag.insert(u.clone()) {
                Ok(_) => {}
                Err(_) => {
                    self.rec.rejected += 1;
                    self.staging.discard(&h);
                    continue;
                }
            }
            self.txbuf.mark_included(&u.payload().transactions);
            self.grew = true;
            self.after_insert();
            queue.extend(self.staging.on_inserted(&h));
        }
    }

    fn after_insert(&mut self) {
        let Some(h) = self.dag.height() else { return };
        if self.rec.heights.last().is_some_and(|&(_, x)| x >= h) {
            return;
        }
        let prev = self.rec.heights.last().map(|&(_, x)| x as i64).unwrap_or(-1);
        self.rec.heights.push((self.now.async_round, h));
        self.rec.sizes.push((h, self.dag.len() + self.staging.len()));
        if let Some(snaps) = self.rec.snapshots.as_mut() {
            for reached in (prev + 1)..=(h as i64) {
                if reached >= 4 {
                    let r = reached as Round - 4;
                    let set = self.dag.units_at_round(r).iter().map(|&u| self.dag.hash(u)).collect();
                    snaps.insert(r, set);
                }
            }
        }
    }

    fn probe(&mut self) {
        let Some(h) = self.dag.height() else { return };
        for r in self.orderer.next_round()..=h {
            if self.rec.head_ready.contains_key(&r) {
                continue;
            }
            if let Ok(Some(_)) = self.orderer.choose_head(r, &self.dag, &mut self.beacon) {
                self.rec.head_ready.insert(r, h);
            }
        }
    }

    fn update_order(&mut self) {
        if self.probe_heads {
            self.probe();
        }
        let events = match self.orderer.update(&self.dag, &mut self.beacon) {
            Ok(e) => e,
            Err(fault) => {
                self.rec.faults.push(fault.to_string());
                return;
            }
        };
        for e in &events {
            self.rec.heads.push(HeadRecord {
                round: e.round,
                head: self.dag.hash(e.head),
                height: e.height,
                async_round: self.now.async_round,
            });
            if let Beacon::Trustless(m) = &mut self.beacon {
                if e.round == SET_ROUND && self.toss_keys.is_none() {
                    let combined = m.combined_keys(e.head, &self.dag);
                    self.toss_keys = Some(combined.keys.clone());
                    self.rec.combined = Some(combined);
                    self.rec.setup_done = Some(self.now.async_round);
                }
            }
            let horizon = e.round.saturating_sub(2);
            match &mut self.beacon {
                Beacon::Dealer(c) => c.forget_below(horizon),
                Beacon::Trustless(m) => m.forget_below(horizon),
            }
        }
        if events.is_empty() {
            return;
        }
        match self.log.emit_outputs(self.orderer.order(), &self.dag) {
            Ok(new) => {
                let r = self.now.async_round;
                self.rec.output_rounds.extend(new.iter().map(|_| r));
            }
            Err(e) => self.rec.faults.push(e.to_string()),
        }
    }

    fn ready(&self, r: Round) -> bool {
        if r == 0 {
            return true;
        }
        if self.dag.unit_at(self.me, r - 1).is_none() {
            return false;
        }
        let mut creators: Vec<NodeId> = self
            .dag
            .units_at_round(r - 1)
            .iter()
            .map(|&u| self.dag.creator(u))
            .filter(|&c| !self.skip_creator(c))
            .collect();
        creators.dedup();
        creators.sort_unstable();
        creators.dedup();
        creators.len() >= self.dag.quorum()
    }

    fn parents_for(&self, r: Round) -> Vec<UnitIdx> {
        let mut out = Vec::new();
        if r == 0 {
            return out;
        }
        for c in 0..self.n {
            if self.skip_creator(c) {
                continue;
            }
            let Some(top) = self.dag.top_round(c) else { continue };
            let mut x = top.min(r - 1);
            loop {
                if let Some(&u) = self.dag.variants(c, x).first() {
                    out.push(u);
                    break;
                }
                if x == 0 {
                    break;
                }
                x -= 1;
            }
        }
        out
    }

    fn try_create(&mut self, out: &mut Outbox<NetMessage>) {
        if self.reading {
            return;
        }
        loop {
            let r = self.next_round;
            if self.stop_after.is_some_and(|s| r > s) {
                return;
            }
            if self.quick.as_ref().is_some_and(|q| q.alerts.in_alert_mode()) && self.hardened() {
                return;
            }
            if !self.ready(r) {
                return;
            }
            let parents = self.parents_for(r);
            let txs = self.txbuf.select_payload(self.n, &mut self.rng);
            let mut payload = Payload::with_transactions(txs);
            match &mut self.beacon {
                Beacon::Dealer(c) => payload.coin_share = c.share(r),
                Beacon::Trustless(m) => {
                    let kb = (r == 0).then(|| m.make_key_box(self.flags.garbage, &mut self.rng));
                    m.fill_payload(&mut payload, r, &parents, &self.dag, kb);
                }
            }
            let hashes: Vec<Digest> = parents.iter().map(|&p| self.dag.hash(p)).collect();
            let units: Vec<Arc<Unit>> = (0..self.flags.variants)
                .map(|i| {
                    let mut p = payload.clone();
                    if i > 0 {
                        p.transactions.push(format!("variant {} {} {}", self.me, r, i).into_bytes());
                    }
                    Arc::new(Unit::new_signed(&self.backend, &self.sk, self.me, r, hashes.clone(), p))
                })
                .collect();
            self.next_round += 1;
            self.rec.created.insert(r, self.now.async_round);
            match self.mode {
                ConsensusMode::Aleph => self.propose_units(r, units),
                ConsensusMode::Quick => self.multicast_units(units, out),
            }
        }
    }

    fn propose_units(&mut self, r: Round, units: Vec<Arc<Unit>>) {
        let id = InstanceId::Unit { proposer: self.me, round: r };
        if units.len() == 1 {
            let bytes = units[0].canonical_encode().to_vec();
            self.rbc_call(|rbc, host| {
                rbc.propose(id, &bytes, host);
            });
            return;
        }
        let code = self.rbc.code();
        let sets: Vec<Vec<RbcMessage>> = units.iter().map(|u| proposals(code, id, u.canonical_encode()).1).collect();
        let k = sets.len();
        let msgs: Vec<(NodeId, RbcMessage)> = (0..self.n).map(|j| (j, sets[j % k][j].clone())).collect();
        self.rbc_call(|rbc, host| rbc.propose_raw(msgs, host));
    }

    fn multicast_units(&mut self, units: Vec<Arc<Unit>>, out: &mut Outbox<NetMessage>) {
        let compact: Vec<Arc<CompactUnit>> = units
            .iter()
            .map(|u| Arc::new(CompactUnit::from_unit(u, &self.dag).expect("own parents are local")))
            .collect();
        for u in &units {
            self.prevalidated.insert(u.hash());
            self.insert_cascade(u.clone());
        }
        if compact.len() == 1 {
            out.multicast(NetMessage::Compact(compact[0].clone()));
        } else {
            for j in (0..self.n).filter(|&j| j != self.me) {
                out.send(j, NetMessage::Compact(compact[j % compact.len()].clone()));
            }
        }
    }

    fn handle(&mut self, from: NodeId, msg: NetMessage, out: &mut Outbox<NetMessage>) {
        if self.banned(from) {
            return;
        }
        match msg {
            NetMessage::Rbc(m) => self.rbc_call(|rbc, host| rbc.handle(from, m, host)),
            NetMessage::Compact(cu) => {
                if self.quick.is_none() {
                    return;
                }
                match resolve_parents(&cu.parents, &self.dag) {
                    Resolved::Parents(ps) => self.accept_quick(cu.expand(ps), from, out),
                    _ => out.send(from, NetMessage::RequestCoords(cu.creator, cu.round)),
                }
            }
            NetMessage::Units(us) => {
                if self.quick.is_none() {
                    return;
                }
                let mut us = us;
                us.sort_by_key(|u| u.round());
                for u in us {
                    self.accept_quick(u, from, out);
                }
            }
            NetMessage::Info { info, reply } => {
                let units = units_peer_lacks(&info, &self.dag, 8 * self.n);
                if !units.is_empty() {
                    out.send(from, NetMessage::Units(units));
                }
                if reply && peer_has_more(&info, &self.dag) {
                    out.send(from, NetMessage::Info { info: Arc::new(ConciseInfo::of(&self.dag)), reply: false });
                }
            }
            NetMessage::Request(hs) => {
                let step = self.now.step;
                let allowed = match self.quick.as_mut() {
                    Some(q) => q.spam.allow(from, &hs, step),
                    None => false,
                };
                if !allowed {
                    return;
                }
                let units: Vec<Arc<Unit>> = hs
                    .iter()
                    .filter_map(|h| self.dag.lookup(h))
                    .take(8 * self.n)
                    .map(|u| self.dag.unit(u).clone())
                    .collect();
                if !units.is_empty() {
                    out.send(from, NetMessage::Units(units));
                }
            }
            NetMessage::RequestCoords(c, r) => {
                let units: Vec<Arc<Unit>> = self.dag.variants(c, r).iter().map(|&u| self.dag.unit(u).clone()).collect();
                if !units.is_empty() {
                    out.send(from, NetMessage::Units(units));
                }
            }
            NetMessage::TossShare(m, s) => self.toss_inbox.push((m, s)),
        }
    }

    fn toss_tick(&mut self, out: &mut Outbox<NetMessage>) {
        let Some(keys) = self.toss_keys.as_ref() else { return };
        for m in std::mem::take(&mut self.toss_queue) {
            self.tosses.entry(m).or_insert_with(|| TossCollector::new(&self.backend, m));
            if self.flags.withhold {
                continue;
            }
            if let Some(s) = toss_share(&self.backend, keys, self.me, m) {
                out.multicast(NetMessage::TossShare(m, s.clone()));
                self.toss_inbox.push((m, s));
            }
        }
        for (m, s) in std::mem::take(&mut self.toss_inbox) {
            let c = self.tosses.entry(m).or_insert_with(|| TossCollector::new(&self.backend, m));
            if c.output().is_some() {
                continue;
            }
            if let Some(d) = c.add(&self.backend, keys, &s, &mut self.lagrange) {
                self.rec.toss_outputs.insert(m, (d, self.now.async_round));
            }
        }
    }

    fn gossip_tick(&mut self, out: &mut Outbox<NetMessage>) {
        if self.quick.is_none() {
            return;
        }
        let peers: Vec<NodeId> = (0..self.n).filter(|&j| j != self.me && !self.banned(j)).collect();
        if peers.is_empty() {
            return;
        }
        if self.rng.gen_ratio(1, 4) {
            let p = *peers.choose(&mut self.rng).unwrap();
            out.send(p, NetMessage::Info { info: Arc::new(ConciseInfo::of(&self.dag)), reply: true });
        }
        if !self.staging.is_empty() && self.now.step % 4 == self.me as u64 % 4 {
            let mut missing = self.staging.missing(&self.dag);
            missing.truncate(8 * self.n);
            if !missing.is_empty() {
                let p = *peers.choose(&mut self.rng).unwrap();
                out.send(p, NetMessage::Request(missing));
            }
        }
    }

    /// The coordinator assembles and releases the bomb once its dag holds
    /// every unit the construction links to.
    fn bomb_tick(&mut self, out: &mut Outbox<NetMessage>) {
        let Some(kit) = self.bomb.as_ref() else { return };
        if self.rec.bomb_launched.is_some() {
            return;
        }
        let plan = &kit.plan;
        let dag = &self.dag;
        let bombers: HashSet<NodeId> = plan.nodes.iter().copied().collect();
        let honest_at = |r: Round| -> Vec<Arc<Unit>> {
            let mut seen = HashSet::new();
            dag.units_at_round(r)
                .iter()
                .filter(|&&u| !bombers.contains(&dag.creator(u)) && seen.insert(dag.creator(u)))
                .map(|&u| dag.unit(u).clone())
                .collect()
        };
        for k in 1..=plan.depth {
            let r = plan.fork_round(k) - 1;
            if honest_at(r).len() + 1 < dag.quorum() {
                return;
            }
            for s in 0..2 {
                if dag.unit_at(plan.nodes[2 * (k - 1) + s], r).is_none() {
                    return;
                }
            }
        }
        let b = self.backend.clone();
        let coin_keys = &kit.coin_keys;
        let built = plan.build(
            &self.backend,
            &|j| kit.keys[&j].clone(),
            &honest_at,
            &|j, r| dag.unit_at(j, r).map(|u| dag.unit(u).clone()),
            &mut |j, r| {
                let mut p = Payload::default();
                if let Some(tk) = coin_keys.get(&j) {
                    p.coin_share = Some(create_share_on(&b, &b.hash_to_group(&coin_nonce(r)), tk, j));
                }
                p
            },
        );
        let bomb = match built {
            Ok(x) => x,
            Err(e) => {
                self.rec.faults.push(e.to_string());
                self.rec.bomb_launched = Some(self.now.async_round);
                return;
            }
        };
        let targets: Vec<NodeId> = (0..self.n).filter(|j| !bombers.contains(j)).collect();
        self.rec.bomb_launched = Some(self.now.async_round);
        self.rec.bomb_units = bomb.units.iter().map(|u| u.hash()).collect();
        for u in &bomb.units {
            self.prevalidated.insert(u.hash());
            self.insert_cascade(u.clone());
        }
        for j in targets {
            out.send(j, NetMessage::Units(bomb.finals.clone()));
        }
    }
}

impl Process for Node {
    type Msg = NetMessage;

    fn step(&mut self, info: StepInfo, inbox: Vec<(NodeId, NetMessage)>, out: &mut Outbox<NetMessage>) {
        self.now = info;
        self.reading = true;
        for (from, m) in inbox {
            self.handle(from, m, out);
            self.settle(out);
        }
        self.reading = false;
        self.try_create(out);
        self.settle(out);
        self.toss_tick(out);
        self.gossip_tick(out);
        self.bomb_tick(out);
        self.settle(out);
    }
}

/// Transaction ids in a node's output, for cross-node comparisons.
pub fn output_ids(n: &Node) -> &[TxId] {
    n.log.entries()
}
