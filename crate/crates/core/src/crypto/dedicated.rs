//! Deterministic public-key encryption for each ordered pair (k → i).
//!
//! Enc(pk, d) = (R, d ⊕ KDF(pk^e ‖ pair ‖ |d|)) with R = g^e and
//! e = H(pk ‖ pair ‖ d). Equal plaintexts give equal ciphertexts, and
//! anyone holding pk can re-encrypt a claimed plaintext to check it.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::group::{Element, GroupBackend, Scalar};
use super::hash::{expand, Hasher};
use super::CryptoError;
use crate::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ciphertext(#[serde(with = "hex_bytes")] pub Vec<u8>);

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

/// Public keys pk_{k→i} for all ordered pairs, stored row-major by k.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedicatedPublicKeys {
    n: usize,
    pk: Vec<Element>,
}

/// All key pairs; a node only keeps the secret keys of pairs ending at it.
#[derive(Clone, Debug)]
pub struct DedicatedKeyPairs {
    pub public: DedicatedPublicKeys,
    sk: Vec<Scalar>,
}

impl DedicatedPublicKeys {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: NodeId, i: NodeId) -> &Element {
        &self.pk[k * self.n + i]
    }
}

impl DedicatedKeyPairs {
    pub fn generate<R: RngCore + ?Sized>(b: &GroupBackend, n: usize, rng: &mut R) -> Self {
        let sk: Vec<Scalar> = (0..n * n).map(|_| b.random_scalar(rng)).collect();
        let pk = sk.iter().map(|s| b.exp_g(s)).collect();
        DedicatedKeyPairs { public: DedicatedPublicKeys { n, pk }, sk }
    }

    pub fn secret(&self, k: NodeId, i: NodeId) -> &Scalar {
        &self.sk[k * self.public.n + i]
    }

    /// Secret keys sk_{k→i} for every k, as held by recipient i.
    pub fn recipient_keys(&self, i: NodeId) -> Vec<Scalar> {
        (0..self.public.n).map(|k| self.secret(k, i).clone()).collect()
    }
}

fn pair_id(k: NodeId, i: NodeId) -> [u8; 16] {
    let mut out = [0u8; 16];
    out[..8].copy_from_slice(&(k as u64).to_be_bytes());
    out[8..].copy_from_slice(&(i as u64).to_be_bytes());
    out
}

fn keystream(b: &GroupBackend, shared: &Element, k: NodeId, i: NodeId, len: usize) -> Vec<u8> {
    let mut seed = b.element_bytes(shared);
    seed.extend_from_slice(&pair_id(k, i));
    seed.extend_from_slice(&(len as u64).to_be_bytes());
    expand("dedicated-kdf", &seed, len)
}

pub fn enc_dedicated(b: &GroupBackend, pks: &DedicatedPublicKeys, k: NodeId, i: NodeId, plaintext: &[u8]) -> Ciphertext {
    let pk = pks.get(k, i);
    let mut h = Hasher::new("dedicated-eph");
    h.part(&b.element_bytes(pk)).part(&pair_id(k, i)).part(plaintext);
    let e = b.hash_to_scalar(h);
    let r = b.exp_g(&e);
    let ks = keystream(b, &b.exp(pk, &e), k, i, plaintext.len());
    let mut out = b.element_bytes(&r);
    out.extend(plaintext.iter().zip(ks).map(|(p, s)| p ^ s));
    Ciphertext(out)
}

pub fn dec_dedicated(b: &GroupBackend, sk: &Scalar, k: NodeId, i: NodeId, ct: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
    let el = b.element_len();
    if ct.0.len() < el {
        return Err(CryptoError::Decode(format!("ciphertext of {} bytes is shorter than its header", ct.0.len())));
    }
    let r = b.element_from_bytes(&ct.0[..el])?;
    let body = &ct.0[el..];
    let ks = keystream(b, &b.exp(&r, sk), k, i, body.len());
    Ok(body.iter().zip(ks).map(|(c, s)| c ^ s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (std::sync::Arc<GroupBackend>, DedicatedKeyPairs, ChaCha20Rng) {
        let b = GroupBackend::reference();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let keys = DedicatedKeyPairs::generate(&b, 4, &mut rng);
        (b, keys, rng)
    }

    #[test]
    fn round_trip_random_scalar() {
        let (b, keys, mut rng) = setup();
        let d = b.scalar_bytes(&b.random_scalar(&mut rng));
        let ct = enc_dedicated(&b, &keys.public, 1, 3, &d);
        assert_eq!(dec_dedicated(&b, keys.secret(1, 3), 1, 3, &ct).unwrap(), d);
    }

    #[test]
    fn deterministic() {
        let (b, keys, _) = setup();
        let a = enc_dedicated(&b, &keys.public, 0, 2, b"key");
        assert_eq!(a, enc_dedicated(&b, &keys.public, 0, 2, b"key"));
        assert_ne!(a, enc_dedicated(&b, &keys.public, 1, 2, b"key"));
    }

    #[test]
    fn cross_pair_decryption_garbles() {
        let (b, keys, mut rng) = setup();
        for _ in 0..20 {
            let d = b.scalar_bytes(&b.random_scalar(&mut rng));
            let ct = enc_dedicated(&b, &keys.public, 2, 1, &d);
            assert_ne!(dec_dedicated(&b, keys.secret(0, 1), 0, 1, &ct).unwrap(), d);
        }
    }

    #[test]
    fn malformed_ciphertext_rejected() {
        let (b, keys, _) = setup();
        let short = Ciphertext(vec![1, 2, 3]);
        assert!(matches!(dec_dedicated(&b, keys.secret(0, 0), 0, 0, &short), Err(CryptoError::Decode(_))));
        let mut bad = vec![0u8; b.element_len()];
        bad.extend_from_slice(b"xx");
        assert!(dec_dedicated(&b, keys.secret(0, 0), 0, 0, &Ciphertext(bad)).is_err());
    }
}
