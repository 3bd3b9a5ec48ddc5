//! λ-bit hashing. λ = 256 (SHA-256).

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

/// Digest length in bytes.
pub const DIGEST_LEN: usize = 32;

/// A λ-bit digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    /// Most significant bit of the first byte.
    pub fn first_bit(&self) -> bool {
        self.0[0] & 0x80 != 0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Digest> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; DIGEST_LEN] = bytes.try_into().ok()?;
        Some(Digest(arr))
    }

    /// Short prefix for logs.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.short())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("bad digest hex"))
    }
}

/// hash(m).
pub fn hash_bytes(m: &[u8]) -> Digest {
    let out = Sha256::digest(m);
    let mut d = [0u8; DIGEST_LEN];
    d.copy_from_slice(out.as_slice());
    Digest(d)
}

/// Incremental hasher. Every part is length-prefixed, so
/// `("ab", "c")` and `("a", "bc")` hash differently.
#[derive(Clone, Default)]
pub struct Hasher {
    inner: Sha256,
}

impl Hasher {
    pub fn new(domain: &str) -> Self {
        let mut h = Hasher { inner: Sha256::new() };
        h.part(domain.as_bytes());
        h
    }

    pub fn part(&mut self, bytes: &[u8]) -> &mut Self {
        self.inner.update((bytes.len() as u64).to_be_bytes());
        self.inner.update(bytes);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.inner.update(v.to_be_bytes());
        self
    }

    pub fn finish(self) -> Digest {
        let out = self.inner.finalize();
        let mut d = [0u8; DIGEST_LEN];
        d.copy_from_slice(out.as_slice());
        Digest(d)
    }
}

/// Expands a seed into `len` pseudorandom bytes (counter mode).
pub fn expand(domain: &str, seed: &[u8], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + DIGEST_LEN);
    let mut ctr = 0u64;
    while out.len() < len {
        let mut h = Hasher::new(domain);
        h.part(seed).u64(ctr);
        out.extend_from_slice(&h.finish().0);
        ctr += 1;
    }
    out.truncate(len);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_is_accepted() {
        // SHA-256 of the empty string.
        assert_eq!(
            hash_bytes(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn hex_round_trip() {
        let d = hash_bytes(b"abc");
        assert_eq!(Digest::from_hex(&d.to_hex()), Some(d));
        assert_eq!(Digest::from_hex("00"), None);
    }

    #[test]
    fn parts_are_delimited() {
        let mut a = Hasher::new("t");
        a.part(b"ab").part(b"c");
        let mut b = Hasher::new("t");
        b.part(b"a").part(b"bc");
        assert_ne!(a.finish(), b.finish());
    }

    #[test]
    fn no_collisions_in_birthday_sample() {
        let mut seen = std::collections::HashSet::new();
        for i in 0u64..100_000 {
            assert!(seen.insert(hash_bytes(&i.to_le_bytes())));
        }
    }

    #[test]
    fn expand_lengths() {
        assert_eq!(expand("x", b"s", 0).len(), 0);
        assert_eq!(expand("x", b"s", 70).len(), 70);
        assert_eq!(expand("x", b"s", 70)[..32], expand("x", b"s", 32)[..]);
    }
}
