//! `Toss(m)` after setup: every key holder multicasts one share; the output
//! is the hash of the signature interpolated from the first f+1 valid ones.

use std::collections::BTreeMap;

use super::Lagrange;
use crate::crypto::{create_share_on, signature_bits, verify_share_on, Digest, Element, GroupBackend, SignatureShare, ThresholdKeySet};
use crate::NodeId;

pub fn toss_nonce(m: u64) -> Vec<u8> {
    format!("toss|{m}").into_bytes()
}

pub fn toss_share(b: &GroupBackend, keys: &ThresholdKeySet, me: NodeId, m: u64) -> Option<SignatureShare> {
    let tk = keys.tk.get(me)?.as_ref()?;
    Some(create_share_on(b, &b.hash_to_group(&toss_nonce(m)), tk, me))
}

/// Collects shares for one nonce at one node.
pub struct TossCollector {
    pub nonce: u64,
    base: Element,
    shares: BTreeMap<NodeId, Element>,
    output: Option<Digest>,
}

impl TossCollector {
    pub fn new(b: &GroupBackend, m: u64) -> Self {
        TossCollector { nonce: m, base: b.hash_to_group(&toss_nonce(m)), shares: BTreeMap::new(), output: None }
    }

    pub fn output(&self) -> Option<Digest> {
        self.output
    }

    pub fn valid_shares(&self) -> usize {
        self.shares.len()
    }

    /// Returns the output when this share completes the quorum.
    pub fn add(&mut self, b: &GroupBackend, keys: &ThresholdKeySet, s: &SignatureShare, lagrange: &mut Lagrange) -> Option<Digest> {
        if self.output.is_some() || self.shares.contains_key(&s.signer) {
            return None;
        }
        let vk = keys.vk.get(s.signer)?;
        if !verify_share_on(b, &self.base, s, vk) {
            return None;
        }
        self.shares.insert(s.signer, s.value.clone());
        if self.shares.len() < keys.f + 1 {
            return None;
        }
        let picked: Vec<(NodeId, &Element)> = self.shares.iter().map(|(&i, v)| (i, v)).collect();
        let d = signature_bits(b, &lagrange.combine(&picked));
        self.output = Some(d);
        Some(d)
    }
}
