//! Hashing, the prime-order group, threshold signatures, unit signatures
//! and the dedicated-pair encryption used by key boxes.

pub mod dedicated;
pub mod group;
pub mod hash;
pub mod poly;
pub mod schnorr;
pub mod threshold;
pub mod vectors;

pub use dedicated::{dec_dedicated, enc_dedicated, Ciphertext, DedicatedKeyPairs, DedicatedPublicKeys};
pub use group::{BackendParams, Element, GroupBackend, Scalar};
pub use hash::{hash_bytes, Digest, Hasher, DIGEST_LEN};
pub use poly::{eval_commitment, Polynomial};
pub use schnorr::{Signature, SigningKey};
pub use threshold::{
    combine_shares, combine_with_coefficients, create_share, create_share_on, eval_point, generate_keys, generate_signature,
    keys_from_polynomial, lagrange_at_zero, signature_bits, verify_share, verify_share_on, DleqProof,
    SignatureShare, ThresholdKeySet,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("reconstruction error: {0}")]
    Reconstruction(String),
}

/// Nonce bytes for a protocol secret: decimal index, '|', decimal round.
pub fn nonce(i: usize, r: u32) -> Vec<u8> {
    format!("{i}|{r}").into_bytes()
}
