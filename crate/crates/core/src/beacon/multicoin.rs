//! Trustless setup: key votes at round 3, trusted sets at round 6 and the
//! multicoin `SecretBits` used by the consensus from round 6 on.
//!
//! A node k that owes shares for nonce "i|r" under every key set j ∈ T_i
//! publishes a single aggregated share m̃^{Σ_j tk_{j,k}} with a DLEQ proof
//! against ∏_j vk_{j,k}. Interpolating f+1 of them gives τ_{m,i} directly.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rand::RngCore;

use super::keybox::{build_key_box, corrupt_key_box, vote_is_admissible, vote_key_box, KeyBox, KeyVote};
use super::Lagrange;
use crate::chdag::{ChDag, MultiShare, Payload, PayloadRules, Unit, UnitIdx};
use crate::consensus::SecretSource;
use crate::crypto::{
    create_share_on, eval_commitment, eval_point, nonce, signature_bits, verify_share_on, DedicatedPublicKeys,
    Digest, Element, GroupBackend, Scalar, ThresholdKeySet,
};
use crate::{NodeId, Round};

pub const VOTE_ROUND: Round = 3;
pub const SET_ROUND: Round = 6;

/// Public parameters of a trustless world.
pub struct TrustlessConfig {
    pub backend: Arc<GroupBackend>,
    pub n: usize,
    pub f: usize,
    pub pks: Arc<DedicatedPublicKeys>,
}

/// T_i together with the aggregated commitment ∏_{j∈T_i} C_j.
#[derive(Clone, Debug)]
pub struct TrustedSet {
    pub owner: NodeId,
    pub members: Vec<NodeId>,
    pub commitment: Vec<Element>,
}

impl TrustedSet {
    /// ∏_{j∈T_i} vk_{j,k}.
    pub fn aggregated_vk(&self, b: &GroupBackend, k: NodeId) -> Element {
        eval_commitment(b, &self.commitment, eval_point(k))
    }
}

type Owners = u128;

/// Facts that depend only on unit hashes, shared by all nodes of a world.
#[derive(Default)]
pub struct SetupCache {
    owners: Mutex<HashMap<Digest, Owners>>,
    trusted: Mutex<HashMap<Digest, Arc<TrustedSet>>>,
    agg_vk: Mutex<HashMap<(Digest, NodeId), Element>>,
    verdicts: Mutex<HashMap<Digest, Result<(), String>>>,
}

fn key_box_of(dag: &ChDag, k: NodeId) -> Option<&KeyBox> {
    dag.unit_at(k, 0).and_then(|u| dag.unit(u).payload().key_box.as_ref())
}

fn parent_indices(unit: &Unit, dag: &ChDag) -> Vec<UnitIdx> {
    unit.parents().iter().filter_map(|h| dag.lookup(h)).collect()
}

/// Creators whose round-`r` unit lies in the cone of `tops`.
fn creators_below(dag: &ChDag, tops: &[UnitIdx], r: Round) -> Vec<NodeId> {
    let mut out: Vec<NodeId> =
        dag.collect_below(tops, |x| dag.round(x) >= r).into_iter().filter(|&x| dag.round(x) == r).map(|x| dag.creator(x)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

impl SetupCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// {i : U[i;6] ≤ x}.
    fn owners(&self, x: UnitIdx, dag: &ChDag) -> Owners {
        let r = dag.round(x);
        if r < SET_ROUND {
            return 0;
        }
        if r == SET_ROUND {
            return 1 << dag.creator(x);
        }
        let h = dag.hash(x);
        if let Some(&o) = self.owners.lock().unwrap().get(&h) {
            return o;
        }
        let o = dag.parents(x).iter().fold(0, |acc, &p| acc | self.owners(p, dag));
        self.owners.lock().unwrap().insert(h, o);
        o
    }

    /// Owners for a unit of `round` by `creator` with the given parents.
    pub fn owners_for(&self, creator: NodeId, round: Round, parents: &[UnitIdx], dag: &ChDag) -> Vec<NodeId> {
        let mut o: Owners = parents.iter().fold(0, |acc, &p| acc | self.owners(p, dag));
        if round == SET_ROUND {
            o |= 1 << creator;
        }
        (0..dag.n()).filter(|&i| o >> i & 1 == 1).collect()
    }

    /// T_i for V = a round-6 unit with hash `v` and parents `parents`.
    pub fn trusted_set_for(
        &self,
        cfg: &TrustlessConfig,
        owner: NodeId,
        v: Digest,
        parents: &[UnitIdx],
        dag: &ChDag,
    ) -> Arc<TrustedSet> {
        if let Some(t) = self.trusted.lock().unwrap().get(&v) {
            return t.clone();
        }
        let t = Arc::new(compute_trusted_set_below(cfg, owner, parents, dag));
        self.trusted.lock().unwrap().insert(v, t.clone());
        t
    }

    /// T_i from the copy of U[i;6] in `dag`.
    pub fn trusted_set(&self, cfg: &TrustlessConfig, i: NodeId, dag: &ChDag) -> Option<Arc<TrustedSet>> {
        let v = dag.unit_at(i, SET_ROUND)?;
        Some(self.trusted_set_for(cfg, i, dag.hash(v), dag.parents(v), dag))
    }

    fn aggregated_vk(&self, cfg: &TrustlessConfig, v: Digest, t: &TrustedSet, k: NodeId) -> Element {
        if let Some(e) = self.agg_vk.lock().unwrap().get(&(v, k)) {
            return e.clone();
        }
        let e = t.aggregated_vk(&cfg.backend, k);
        self.agg_vk.lock().unwrap().insert((v, k), e.clone());
        e
    }
}

/// k ∈ T_i iff U[k;0] ≤ V and no j with U[j;3] ≤ V voted bad on KB_k.
/// `parents` are V's parents. Absent votes do not block.
pub fn compute_trusted_set_below(cfg: &TrustlessConfig, owner: NodeId, parents: &[UnitIdx], dag: &ChDag) -> TrustedSet {
    let dealers = creators_below(dag, parents, 0);
    let voters = creators_below(dag, parents, VOTE_ROUND);
    let mut members = Vec::new();
    for k in dealers {
        let rejected = voters.iter().any(|&j| {
            let u = dag.unit_at(j, VOTE_ROUND).expect("voter unit in cone");
            dag.unit(u).payload().key_votes.iter().any(|v| v.dealer == k && !v.is_ok())
        });
        if !rejected {
            members.push(k);
        }
    }
    let b = &cfg.backend;
    let mut commitment = vec![b.identity(); cfg.f + 1];
    for &k in &members {
        let kb = key_box_of(dag, k).expect("validated round-0 unit carries a key box");
        for (acc, c) in commitment.iter_mut().zip(&kb.commitment) {
            *acc = b.mul(acc, c);
        }
    }
    TrustedSet { owner, members, commitment }
}

/// `compute_trusted_set(i, dag)`; `None` while U[i;6] is missing.
pub fn compute_trusted_set(cfg: &TrustlessConfig, i: NodeId, dag: &ChDag) -> Option<TrustedSet> {
    let v = dag.unit_at(i, SET_ROUND)?;
    Some(compute_trusted_set_below(cfg, i, dag.parents(v), dag))
}

/// Whether k owes no share for T_i: it voted bad on, or never voted on,
/// some member.
pub fn exempt(t: &TrustedSet, k: NodeId, dag: &ChDag) -> bool {
    let Some(u) = dag.unit_at(k, VOTE_ROUND) else { return true };
    let votes = &dag.unit(u).payload().key_votes;
    t.members.iter().any(|&j| !votes.iter().any(|v| v.dealer == j && v.is_ok()))
}

/// The (i, j) pairs node k is obligated to sign for in a unit with the given
/// owners: one share for nonce "i|r" under tk_{j,k} per pair.
pub fn share_obligations(
    cache: &SetupCache,
    cfg: &TrustlessConfig,
    k: NodeId,
    owners: &[NodeId],
    dag: &ChDag,
    own_set: Option<&Arc<TrustedSet>>,
) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for &i in owners {
        let t = match own_set.filter(|t| t.owner == i) {
            Some(t) => t.clone(),
            None => cache.trusted_set(cfg, i, dag).expect("owner's round-6 unit present"),
        };
        if !exempt(&t, k, dag) {
            out.extend(t.members.iter().map(|&j| (i, j)));
        }
    }
    out
}

/// Payload rules of the trustless beacon.
pub struct TrustlessRules {
    cfg: Arc<TrustlessConfig>,
    cache: Arc<SetupCache>,
}

impl TrustlessRules {
    pub fn new(cfg: Arc<TrustlessConfig>, cache: Arc<SetupCache>) -> Self {
        TrustlessRules { cfg, cache }
    }

    fn check_uncached(&self, unit: &Unit, round: Round, dag: &ChDag) -> Result<(), String> {
        let p = unit.payload();
        let k = unit.creator();
        let b = &self.cfg.backend;
        if p.coin_share.is_some() {
            return Err("dealer coin share in trustless mode".into());
        }
        match (round, &p.key_box) {
            (0, Some(kb)) => {
                if kb.dealer != k || !kb.well_formed(b, self.cfg.n, self.cfg.f) {
                    return Err("malformed key box".into());
                }
            }
            (0, None) => return Err("round-0 unit without key box".into()),
            (_, Some(_)) => return Err("key box outside round 0".into()),
            _ => {}
        }
        let parents = parent_indices(unit, dag);
        if round == VOTE_ROUND {
            let dealers = creators_below(dag, &parents, 0);
            if p.key_votes.len() != dealers.len() {
                return Err(format!("{} key votes, expected {}", p.key_votes.len(), dealers.len()));
            }
            for (v, &j) in p.key_votes.iter().zip(&dealers) {
                if v.voter != k || v.dealer != j {
                    return Err("key votes out of order".into());
                }
                let kb = key_box_of(dag, j).ok_or("dealer unit without key box")?;
                if !vote_is_admissible(b, &self.cfg.pks, kb, v) {
                    return Err(format!("inadmissible bad vote on dealer {j}"));
                }
            }
        } else if !p.key_votes.is_empty() {
            return Err("key votes outside round 3".into());
        }
        if round < SET_ROUND {
            return if p.multicoin.is_empty() { Ok(()) } else { Err("multicoin shares before round 6".into()) };
        }
        let own = (round == SET_ROUND)
            .then(|| self.cache.trusted_set_for(&self.cfg, k, unit.hash(), &parents, dag));
        let owners = self.cache.owners_for(k, round, &parents, dag);
        let mut expected = Vec::new();
        for i in owners {
            let (v, t) = match &own {
                Some(t) if i == k => (unit.hash(), t.clone()),
                _ => {
                    let vi = dag.unit_at(i, SET_ROUND).ok_or("owner unit missing")?;
                    (dag.hash(vi), self.cache.trusted_set(&self.cfg, i, dag).ok_or("owner unit missing")?)
                }
            };
            if !exempt(&t, k, dag) {
                expected.push((i, v, t));
            }
        }
        if p.multicoin.len() != expected.len() {
            return Err(format!("{} multicoin shares, expected {}", p.multicoin.len(), expected.len()));
        }
        for (ms, (i, v, t)) in p.multicoin.iter().zip(&expected) {
            if ms.owner != *i || ms.share.signer != k {
                return Err("multicoin shares out of order".into());
            }
            let base = b.hash_to_group(&nonce(*i, round));
            let vk = self.cache.aggregated_vk(&self.cfg, *v, t, k);
            if !verify_share_on(b, &base, &ms.share, &vk) {
                return Err(format!("multicoin share for owner {i} does not verify"));
            }
        }
        Ok(())
    }
}

impl PayloadRules for TrustlessRules {
    fn check(&self, unit: &Unit, round: Round, dag: &ChDag) -> Result<(), String> {
        if let Some(v) = self.cache.verdicts.lock().unwrap().get(&unit.hash()) {
            return v.clone();
        }
        let v = self.check_uncached(unit, round, dag);
        self.cache.verdicts.lock().unwrap().insert(unit.hash(), v.clone());
        v
    }
}

/// Combined key set after setup: A = Σ_{k∈T_l} A_k.
#[derive(Clone, Debug)]
pub struct CombinedKeys {
    pub head_creator: NodeId,
    pub members: Vec<NodeId>,
    pub keys: ThresholdKeySet,
}

/// One node's trustless-beacon state.
pub struct MultiCoinNode {
    cfg: Arc<TrustlessConfig>,
    cache: Arc<SetupCache>,
    me: NodeId,
    secret_keys: Vec<Scalar>,
    /// tk_{j,me}, once KB_j has been opened and checked.
    keys: Vec<Option<Scalar>>,
    opened: Vec<bool>,
    lagrange: Lagrange,
    secrets: HashMap<(NodeId, Round), Digest>,
}

impl MultiCoinNode {
    pub fn new(cfg: Arc<TrustlessConfig>, cache: Arc<SetupCache>, me: NodeId, secret_keys: Vec<Scalar>) -> Self {
        assert!(cfg.n <= Owners::BITS as usize, "trustless beacon supports at most 128 nodes");
        let n = cfg.n;
        MultiCoinNode {
            lagrange: Lagrange::new(cfg.backend.clone()),
            cfg,
            cache,
            me,
            secret_keys,
            keys: vec![None; n],
            opened: vec![false; n],
            secrets: HashMap::new(),
        }
    }

    pub fn me(&self) -> NodeId {
        self.me
    }

    /// KB_me. A garbage dealer corrupts every other recipient's ciphertext.
    pub fn make_key_box<R: RngCore + ?Sized>(&mut self, garbage: bool, rng: &mut R) -> KeyBox {
        let b = &self.cfg.backend;
        let (mut kb, own) = build_key_box(b, &self.cfg.pks, self.me, self.cfg.n, self.cfg.f, rng);
        if garbage {
            let victims: Vec<NodeId> = (0..self.cfg.n).filter(|&i| i != self.me).collect();
            corrupt_key_box(b, &self.cfg.pks, &mut kb, &victims, rng);
        }
        self.keys[self.me] = Some(own.own_key);
        self.opened[self.me] = true;
        kb
    }

    fn open(&mut self, j: NodeId, dag: &ChDag) {
        if self.opened[j] {
            return;
        }
        let Some(kb) = key_box_of(dag, j) else { return };
        let (vote, key) = vote_key_box(&self.cfg.backend, &self.secret_keys[j], kb, self.me);
        debug_assert_eq!(vote.is_ok(), key.is_some());
        self.keys[j] = key;
        self.opened[j] = true;
    }

    /// Beacon sections of this node's next unit.
    pub fn fill_payload(&mut self, payload: &mut Payload, round: Round, parents: &[UnitIdx], dag: &ChDag, key_box: Option<KeyBox>) {
        if round == 0 {
            payload.key_box = key_box;
        }
        if round == VOTE_ROUND {
            payload.key_votes = creators_below(dag, parents, 0)
                .into_iter()
                .map(|j| self.vote(j, dag))
                .collect();
        }
        if round >= SET_ROUND {
            payload.multicoin = self.shares(round, parents, dag);
        }
    }

    fn vote(&mut self, j: NodeId, dag: &ChDag) -> KeyVote {
        let kb = key_box_of(dag, j).expect("dealer unit below");
        let (vote, key) = vote_key_box(&self.cfg.backend, &self.secret_keys[j], kb, self.me);
        self.keys[j] = key;
        self.opened[j] = true;
        vote
    }

    /// Aggregated shares for a unit of `round` over `parents`.
    pub fn shares(&mut self, round: Round, parents: &[UnitIdx], dag: &ChDag) -> Vec<MultiShare> {
        let b = self.cfg.backend.clone();
        let own = (round == SET_ROUND).then(|| Arc::new(compute_trusted_set_below(&self.cfg, self.me, parents, dag)));
        let owners = self.cache.owners_for(self.me, round, parents, dag);
        let mut out = Vec::new();
        for i in owners {
            let t = match &own {
                Some(t) if i == self.me => t.clone(),
                _ => self.cache.trusted_set(&self.cfg, i, dag).expect("owner unit present"),
            };
            if exempt(&t, self.me, dag) {
                continue;
            }
            let mut x = b.scalar(0);
            let mut held = true;
            for &j in &t.members {
                match &self.keys[j] {
                    Some(k) => x = b.add(&x, k),
                    None => held = false,
                }
            }
            if !held {
                // Voted ok yet lacks a key: the unit will be rejected, as it should.
                continue;
            }
            let base = b.hash_to_group(&nonce(i, round));
            out.push(MultiShare { owner: i, share: create_share_on(&b, &base, &x, self.me) });
        }
        out
    }

    /// τ for nonce "i|r" from round-r units, if f+1 shares are present.
    pub fn multicoin_value(&mut self, i: NodeId, r: Round, dag: &ChDag) -> Option<Element> {
        let mut by_signer: BTreeMap<NodeId, &Element> = BTreeMap::new();
        for &u in dag.units_at_round(r) {
            for ms in &dag.unit(u).payload().multicoin {
                if ms.owner == i {
                    by_signer.entry(ms.share.signer).or_insert(&ms.share.value);
                }
            }
        }
        if by_signer.len() <= self.cfg.f {
            return None;
        }
        let picked: Vec<(NodeId, &Element)> = by_signer.into_iter().take(self.cfg.f + 1).collect();
        Some(self.lagrange.combine(&picked))
    }

    /// Key set Σ_{k∈T_l} A_k, where l created the round-6 head.
    pub fn combined_keys(&mut self, head: UnitIdx, dag: &ChDag) -> CombinedKeys {
        let l = dag.creator(head);
        let t = self.cache.trusted_set_for(&self.cfg, l, dag.hash(head), dag.parents(head), dag);
        let b = self.cfg.backend.clone();
        for &j in &t.members {
            self.open(j, dag);
        }
        let vk: Vec<Element> = (0..self.cfg.n).map(|i| t.aggregated_vk(&b, i)).collect();
        let mut tk = vec![None; self.cfg.n];
        let mut sum = Some(b.scalar(0));
        for &j in &t.members {
            sum = match (sum, &self.keys[j]) {
                (Some(s), Some(k)) => Some(b.add(&s, k)),
                _ => None,
            };
        }
        tk[self.me] = sum.filter(|s| b.exp_g(s) == vk[self.me]);
        CombinedKeys {
            head_creator: l,
            members: t.members.clone(),
            keys: ThresholdKeySet { tk, vk, joint_vk: t.commitment[0].clone(), f: self.cfg.f },
        }
    }

    pub fn forget_below(&mut self, r: Round) {
        self.secrets.retain(|&(_, x), _| x >= r);
    }
}

impl SecretSource for MultiCoinNode {
    fn secret_bits(&mut self, i: NodeId, r: Round, dag: &ChDag) -> Option<Digest> {
        if let Some(d) = self.secrets.get(&(i, r)) {
            return Some(*d);
        }
        if r < SET_ROUND || dag.unit_at(i, SET_ROUND).is_none() || dag.height_i64() < r as i64 + 1 {
            return None;
        }
        let tau = self.multicoin_value(i, r, dag)?;
        let d = signature_bits(&self.cfg.backend, &tau);
        self.secrets.insert((i, r), d);
        Some(d)
    }
}
