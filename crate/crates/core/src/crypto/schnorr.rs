//! Schnorr signatures used to sign units and alerts.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::group::{Element, GroupBackend, Scalar};
use super::hash::Hasher;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigningKey {
    secret: Scalar,
    public: Element,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub r: Element,
    pub s: Scalar,
}

impl SigningKey {
    pub fn generate<R: RngCore + ?Sized>(b: &GroupBackend, rng: &mut R) -> Self {
        let secret = b.random_scalar(rng);
        let public = b.exp_g(&secret);
        SigningKey { secret, public }
    }

    pub fn public(&self) -> &Element {
        &self.public
    }

    pub fn sign(&self, b: &GroupBackend, msg: &[u8]) -> Signature {
        let mut nonce = Hasher::new("schnorr-nonce");
        nonce.part(&b.scalar_bytes(&self.secret)).part(msg);
        let k = b.hash_to_scalar(nonce);
        let r = b.exp_g(&k);
        let c = challenge(b, &self.public, &r, msg);
        let s = b.add(&k, &b.mul_scalar(&c, &self.secret));
        Signature { r, s }
    }
}

fn challenge(b: &GroupBackend, pk: &Element, r: &Element, msg: &[u8]) -> Scalar {
    let mut h = Hasher::new("schnorr");
    h.part(&b.element_bytes(pk)).part(&b.element_bytes(r)).part(msg);
    b.hash_to_scalar(h)
}

pub fn verify(b: &GroupBackend, pk: &Element, msg: &[u8], sig: &Signature) -> bool {
    if !b.is_scalar(&sig.s) || !b.is_element(&sig.r) {
        return false;
    }
    let c = challenge(b, pk, &sig.r, msg);
    b.exp_g(&sig.s) == b.mul(&sig.r, &b.exp(pk, &c))
}
