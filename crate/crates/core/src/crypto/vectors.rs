//! Threshold-signature test vectors: backend, seed, nonce and σ_m.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::group::{BackendParams, GroupBackend};
use super::threshold::{create_share, generate_keys, generate_signature};
use super::CryptoError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdVector {
    pub backend: BackendParams,
    pub seed: u64,
    pub n: usize,
    pub f: usize,
    pub nonce: String,
    pub sigma: String,
}

/// Deals keys from `seed`, signs `nonce` with the first f+1 nodes.
pub fn compute_vector(b: &GroupBackend, seed: u64, n: usize, f: usize, nonce: &[u8]) -> Result<ThresholdVector, CryptoError> {
    let (_, keys) = generate_keys(b, n, f, &mut ChaCha20Rng::seed_from_u64(seed))?;
    let shares: Vec<_> = (0..=f)
        .map(|i| create_share(b, nonce, keys.tk[i].as_ref().expect("dealt key"), i))
        .collect();
    let sigma = generate_signature(b, nonce, &shares, &keys.vk, f)?;
    Ok(ThresholdVector {
        backend: b.params(),
        seed,
        n,
        f,
        nonce: hex::encode(nonce),
        sigma: hex::encode(b.element_bytes(&sigma)),
    })
}

/// Recomputes a vector and reports whether σ matches.
pub fn check_vector(v: &ThresholdVector) -> Result<bool, CryptoError> {
    let b = GroupBackend::from_params(&v.backend)?;
    let nonce = hex::decode(&v.nonce).map_err(|e| CryptoError::Decode(e.to_string()))?;
    Ok(compute_vector(&b, v.seed, v.n, v.f, &nonce)?.sigma == v.sigma)
}
