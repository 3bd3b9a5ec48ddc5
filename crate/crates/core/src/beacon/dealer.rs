//! Trusted-dealer `SecretBits`: every round-r unit carries its creator's
//! threshold share for the nonce "r"; the secret is the hash of the
//! reconstructed signature and ignores the node argument.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::RngCore;

use super::Lagrange;
use crate::chdag::{ChDag, PayloadRules, Unit};
use crate::consensus::SecretSource;
use crate::crypto::{
    create_share_on, generate_keys, signature_bits, verify_share_on, Digest, Element, GroupBackend, Scalar,
    SignatureShare, ThresholdKeySet,
};
use crate::{NodeId, Round};

pub fn coin_nonce(r: Round) -> Vec<u8> {
    r.to_string().into_bytes()
}

/// Keys handed out at genesis.
pub fn deal<R: RngCore + ?Sized>(b: &GroupBackend, n: usize, f: usize, rng: &mut R) -> ThresholdKeySet {
    generate_keys(b, n, f, rng).expect("n = 3f+1").1
}

/// Dealer-mode payload rule: exactly one valid coin share by the creator.
pub struct DealerRules {
    backend: Arc<GroupBackend>,
    vk: Arc<Vec<Element>>,
}

impl DealerRules {
    pub fn new(backend: Arc<GroupBackend>, vk: Arc<Vec<Element>>) -> Self {
        DealerRules { backend, vk }
    }
}

impl PayloadRules for DealerRules {
    fn check(&self, unit: &Unit, round: Round, _dag: &ChDag) -> Result<(), String> {
        let p = unit.payload();
        if p.key_box.is_some() || !p.key_votes.is_empty() || !p.multicoin.is_empty() {
            return Err("trustless-beacon section in dealer mode".into());
        }
        let share = p.coin_share.as_ref().ok_or("missing coin share")?;
        if share.signer != unit.creator() {
            return Err("coin share signer is not the creator".into());
        }
        let base = self.backend.hash_to_group(&coin_nonce(round));
        if !verify_share_on(&self.backend, &base, share, &self.vk[share.signer]) {
            return Err("coin share does not verify".into());
        }
        Ok(())
    }
}

/// One node's view of the dealer coin.
pub struct DealerCoin {
    backend: Arc<GroupBackend>,
    f: usize,
    me: NodeId,
    tk: Option<Scalar>,
    lagrange: Lagrange,
    cache: HashMap<Round, Digest>,
}

impl DealerCoin {
    pub fn new(backend: Arc<GroupBackend>, keys: &ThresholdKeySet, me: NodeId) -> Self {
        DealerCoin {
            lagrange: Lagrange::new(backend.clone()),
            backend,
            f: keys.f,
            me,
            tk: keys.tk.get(me).cloned().flatten(),
            cache: HashMap::new(),
        }
    }

    /// The share to embed in this node's round-r unit.
    pub fn share(&self, r: Round) -> Option<SignatureShare> {
        let tk = self.tk.as_ref()?;
        Some(create_share_on(&self.backend, &self.backend.hash_to_group(&coin_nonce(r)), tk, self.me))
    }

    /// σ for nonce "r" from the (already validated) round-r units of `dag`.
    pub fn signature(&mut self, r: Round, dag: &ChDag) -> Option<Element> {
        let mut by_signer: BTreeMap<NodeId, &Element> = BTreeMap::new();
        for &u in dag.units_at_round(r) {
            if let Some(s) = &dag.unit(u).payload().coin_share {
                by_signer.entry(s.signer).or_insert(&s.value);
            }
        }
        if by_signer.len() <= self.f {
            return None;
        }
        let picked: Vec<(NodeId, &Element)> = by_signer.into_iter().take(self.f + 1).collect();
        Some(self.lagrange.combine(&picked))
    }

    /// Drops cached secrets of rounds below `r`.
    pub fn forget_below(&mut self, r: Round) {
        self.cache.retain(|&k, _| k >= r);
    }
}

impl SecretSource for DealerCoin {
    fn secret_bits(&mut self, _i: NodeId, r: Round, dag: &ChDag) -> Option<Digest> {
        if let Some(d) = self.cache.get(&r) {
            return Some(*d);
        }
        if dag.height_i64() < r as i64 + 1 {
            return None;
        }
        let sigma = self.signature(r, dag);
        debug_assert!(sigma.is_some(), "fewer than f+1 coin shares below a round-{} unit", r + 1);
        let d = signature_bits(&self.backend, &sigma?);
        self.cache.insert(r, d);
        Some(d)
    }
}
