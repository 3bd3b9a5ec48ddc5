//! (f+1)-of-N threshold signatures with DLEQ-verified shares.
//!
//! Node `i` (0-based) holds tk_i = A(i+1). A share on nonce m is
//! m̃^{tk_i} with m̃ = hash_to_group(m); f+1 shares interpolate
//! σ_m = m̃^{A(0)} in the exponent.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::group::{Element, GroupBackend, Scalar};
use super::hash::{hash_bytes, Digest, Hasher};
use super::poly::Polynomial;
use super::CryptoError;
use crate::NodeId;

/// Tossing keys (where held), verification keys, and the joint key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdKeySet {
    pub tk: Vec<Option<Scalar>>,
    pub vk: Vec<Element>,
    pub joint_vk: Element,
    pub f: usize,
}

impl ThresholdKeySet {
    pub fn n(&self) -> usize {
        self.vk.len()
    }

    /// Copy that keeps only node `i`'s tossing key.
    pub fn for_holder(&self, i: NodeId) -> ThresholdKeySet {
        let mut tk = vec![None; self.n()];
        tk[i] = self.tk[i].clone();
        ThresholdKeySet { tk, vk: self.vk.clone(), joint_vk: self.joint_vk.clone(), f: self.f }
    }

    /// exp(g, tk_i) = vk_i for every held key.
    pub fn held_keys_consistent(&self, b: &GroupBackend) -> bool {
        self.tk.iter().zip(&self.vk).all(|(tk, vk)| tk.as_ref().map_or(true, |t| &b.exp_g(t) == vk))
    }
}

/// Evaluation point of node `i`.
pub fn eval_point(i: NodeId) -> u64 {
    i as u64 + 1
}

pub fn generate_keys<R: RngCore + ?Sized>(
    b: &GroupBackend,
    n: usize,
    f: usize,
    rng: &mut R,
) -> Result<(Polynomial, ThresholdKeySet), CryptoError> {
    if n != 3 * f + 1 {
        return Err(CryptoError::Config(format!("n = {n} must equal 3f+1 for f = {f}")));
    }
    let a = Polynomial::random(b, f, rng);
    let keys = keys_from_polynomial(b, n, &a);
    Ok((a, keys))
}

/// Deals keys from a given polynomial (also the hook for degenerate tests).
pub fn keys_from_polynomial(b: &GroupBackend, n: usize, a: &Polynomial) -> ThresholdKeySet {
    let tk: Vec<Scalar> = (0..n).map(|i| a.evaluate_at(b, eval_point(i))).collect();
    let vk = tk.iter().map(|t| b.exp_g(t)).collect();
    ThresholdKeySet {
        tk: tk.into_iter().map(Some).collect(),
        vk,
        joint_vk: b.exp_g(&a.coefficients()[0]),
        f: a.degree(),
    }
}

/// Lagrange coefficients l_j with Σ l_j·A(x_j) = A(0), for 1-based points.
pub fn lagrange_at_zero(b: &GroupBackend, indices: &[u64]) -> Result<Vec<Scalar>, CryptoError> {
    let distinct: BTreeSet<u64> = indices.iter().copied().collect();
    if distinct.len() != indices.len() {
        return Err(CryptoError::InvalidInput("duplicate interpolation index".into()));
    }
    if indices.iter().any(|&x| b.scalar(x).is_zero()) {
        return Err(CryptoError::InvalidInput("interpolation index is zero mod q".into()));
    }
    let xs: Vec<Scalar> = indices.iter().map(|&x| b.scalar(x)).collect();
    let mut out = Vec::with_capacity(xs.len());
    for (j, xj) in xs.iter().enumerate() {
        let mut num = b.scalar(1);
        let mut den = b.scalar(1);
        for (m, xm) in xs.iter().enumerate() {
            if m != j {
                num = b.mul_scalar(&num, xm);
                den = b.mul_scalar(&den, &b.sub(xm, xj));
            }
        }
        let inv = b
            .inv(&den)
            .ok_or_else(|| CryptoError::InvalidInput("indices collide mod q".into()))?;
        out.push(b.mul_scalar(&num, &inv));
    }
    Ok(out)
}

/// Non-interactive proof that log_g(vk) = log_h(s).
///
/// The challenge is the full λ-bit digest and is compared at full width;
/// as an exponent it acts modulo q.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DleqProof {
    pub challenge: Digest,
    pub response: Scalar,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignatureShare {
    pub signer: NodeId,
    pub value: Element,
    pub dleq_proof: DleqProof,
}

fn challenge(b: &GroupBackend, vk: &Element, h: &Element, s: &Element, a1: &Element, a2: &Element) -> Digest {
    let mut hs = Hasher::new("dleq");
    for e in [b.generator(), vk, h, s, a1, a2] {
        hs.part(&b.element_bytes(e));
    }
    hs.finish()
}

fn challenge_exponent(b: &GroupBackend, c: &Digest) -> Scalar {
    b.scalar_from_big(&BigUint::from_bytes_be(c.as_bytes()))
}

pub fn prove_dleq(b: &GroupBackend, h: &Element, x: &Scalar, vk: &Element, s: &Element) -> DleqProof {
    let mut nonce = Hasher::new("dleq-nonce");
    nonce.part(&b.scalar_bytes(x)).part(&b.element_bytes(h)).part(&b.element_bytes(s));
    let w = b.hash_to_scalar(nonce);
    let a1 = b.exp_g(&w);
    let a2 = b.exp(h, &w);
    let c = challenge(b, vk, h, s, &a1, &a2);
    let z = b.sub(&w, &b.mul_scalar(x, &challenge_exponent(b, &c)));
    DleqProof { challenge: c, response: z }
}

pub fn verify_dleq(b: &GroupBackend, h: &Element, vk: &Element, s: &Element, proof: &DleqProof) -> bool {
    if !b.is_scalar(&proof.response) || !b.is_element(s) {
        return false;
    }
    let c = challenge_exponent(b, &proof.challenge);
    let a1 = b.mul(&b.exp_g(&proof.response), &b.exp(vk, &c));
    let a2 = b.mul(&b.exp(h, &proof.response), &b.exp(s, &c));
    challenge(b, vk, h, s, &a1, &a2) == proof.challenge
}

/// Share on a precomputed base m̃.
pub fn create_share_on(b: &GroupBackend, base: &Element, tk: &Scalar, i: NodeId) -> SignatureShare {
    let value = b.exp(base, tk);
    let vk = b.exp_g(tk);
    let dleq_proof = prove_dleq(b, base, tk, &vk, &value);
    SignatureShare { signer: i, value, dleq_proof }
}

pub fn create_share(b: &GroupBackend, m: &[u8], tk: &Scalar, i: NodeId) -> SignatureShare {
    create_share_on(b, &b.hash_to_group(m), tk, i)
}

pub fn verify_share_on(b: &GroupBackend, base: &Element, s: &SignatureShare, vk_i: &Element) -> bool {
    verify_dleq(b, base, vk_i, &s.value, &s.dleq_proof)
}

pub fn verify_share(b: &GroupBackend, m: &[u8], s: &SignatureShare, i: NodeId, vk: &[Element]) -> bool {
    if s.signer != i || i >= vk.len() {
        return false;
    }
    verify_share_on(b, &b.hash_to_group(m), s, &vk[i])
}

/// Interpolates f+1 shares in the exponent without checking them.
pub fn combine_shares(b: &GroupBackend, shares: &[(NodeId, &Element)]) -> Result<Element, CryptoError> {
    let idx: Vec<u64> = shares.iter().map(|(i, _)| eval_point(*i)).collect();
    let coeffs = lagrange_at_zero(b, &idx)?;
    Ok(combine_with_coefficients(b, shares.iter().map(|(_, e)| *e), &coeffs))
}

/// ∏ s_j^{l_j} with precomputed coefficients.
pub fn combine_with_coefficients<'a>(
    b: &GroupBackend,
    values: impl Iterator<Item = &'a Element>,
    coeffs: &[Scalar],
) -> Element {
    values.zip(coeffs).fold(b.identity(), |acc, (v, l)| b.mul(&acc, &b.exp(v, l)))
}

/// σ_m from at least f+1 shares; every share is verified.
pub fn generate_signature(
    b: &GroupBackend,
    m: &[u8],
    shares: &[SignatureShare],
    vk: &[Element],
    f: usize,
) -> Result<Element, CryptoError> {
    let mut signers = BTreeSet::new();
    for s in shares {
        if !signers.insert(s.signer) {
            return Err(CryptoError::Reconstruction(format!("duplicate signer {}", s.signer)));
        }
    }
    if shares.len() < f + 1 {
        return Err(CryptoError::Reconstruction(format!("{} shares, need {}", shares.len(), f + 1)));
    }
    let base = b.hash_to_group(m);
    for s in shares {
        if s.signer >= vk.len() || !verify_share_on(b, &base, s, &vk[s.signer]) {
            return Err(CryptoError::Reconstruction(format!("share of {} does not verify", s.signer)));
        }
    }
    let mut sorted: Vec<&SignatureShare> = shares.iter().collect();
    sorted.sort_by_key(|s| s.signer);
    let picked: Vec<(NodeId, &Element)> = sorted.iter().take(f + 1).map(|s| (s.signer, &s.value)).collect();
    combine_shares(b, &picked)
}

/// hash(σ), the λ-bit output extracted from a signature.
pub fn signature_bits(b: &GroupBackend, sigma: &Element) -> Digest {
    hash_bytes(&b.element_bytes(sigma))
}
