//! Canonical byte encoding shared by units and network messages.
//!
//! Layout rules:
//! - integers are fixed-width big-endian (`u8`, `u32`, `u64`);
//! - byte strings and lists carry a `u32` length prefix;
//! - group elements and scalars are a `u8` length followed by the minimal
//!   big-endian magnitude (zero is the empty string); leading zero bytes are
//!   rejected so every value has exactly one encoding;
//! - digests are 32 raw bytes.
//!
//! Decoding is strict: truncated input, non-minimal integers and trailing
//! bytes are all errors.

use crate::crypto::{Digest, DleqProof, Element, Scalar, Signature, SignatureShare, DIGEST_LEN};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("truncated input")]
    Truncated,
    #[error("non-minimal integer encoding")]
    NonMinimal,
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("unknown tag {0}")]
    BadTag(u8),
    #[error("non-canonical: {0}")]
    NonCanonical(String),
}

#[derive(Default, Debug, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    /// Node indices and counts travel as `u32`.
    pub fn index(&mut self, v: usize) -> &mut Self {
        self.u32(u32::try_from(v).expect("index fits in u32"))
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.index(b.len());
        self.buf.extend_from_slice(b);
        self
    }

    pub fn raw(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn digest(&mut self, d: &Digest) -> &mut Self {
        self.buf.extend_from_slice(d.as_bytes());
        self
    }

    fn magnitude(&mut self, be: Vec<u8>) -> &mut Self {
        let start = be.iter().position(|&x| x != 0).unwrap_or(be.len());
        let m = &be[start..];
        self.u8(u8::try_from(m.len()).expect("integer below 2^2040"));
        self.buf.extend_from_slice(m);
        self
    }

    pub fn element(&mut self, e: &Element) -> &mut Self {
        self.magnitude(e.to_bytes_be())
    }

    pub fn scalar(&mut self, s: &Scalar) -> &mut Self {
        self.magnitude(s.to_bytes_be())
    }

    pub fn signature(&mut self, s: &Signature) -> &mut Self {
        self.element(&s.r).scalar(&s.s)
    }

    pub fn share(&mut self, s: &SignatureShare) -> &mut Self {
        self.index(s.signer)
            .element(&s.value)
            .digest(&s.dleq_proof.challenge)
            .scalar(&s.dleq_proof.response)
    }
}

pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn finish(&self) -> Result<(), WireError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(WireError::Trailing(n)),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.remaining() < n {
            return Err(WireError::Truncated);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn index(&mut self) -> Result<usize, WireError> {
        Ok(self.u32()? as usize)
    }

    /// A list length, sanity-checked against the bytes left (each item
    /// needs at least `min_item` bytes).
    pub fn count(&mut self, min_item: usize) -> Result<usize, WireError> {
        let n = self.index()?;
        if n.saturating_mul(min_item.max(1)) > self.remaining() && min_item > 0 {
            return Err(WireError::Truncated);
        }
        Ok(n)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], WireError> {
        let n = self.index()?;
        self.take(n)
    }

    pub fn digest(&mut self) -> Result<Digest, WireError> {
        Ok(Digest(self.take(DIGEST_LEN)?.try_into().unwrap()))
    }

    fn magnitude(&mut self) -> Result<&'a [u8], WireError> {
        let n = self.u8()? as usize;
        let m = self.take(n)?;
        if m.first() == Some(&0) {
            return Err(WireError::NonMinimal);
        }
        Ok(m)
    }

    pub fn element(&mut self) -> Result<Element, WireError> {
        Ok(Element::from_bytes_be_unchecked(self.magnitude()?))
    }

    pub fn scalar(&mut self) -> Result<Scalar, WireError> {
        Ok(Scalar::from_bytes_be_unchecked(self.magnitude()?))
    }

    pub fn signature(&mut self) -> Result<Signature, WireError> {
        Ok(Signature { r: self.element()?, s: self.scalar()? })
    }

    pub fn share(&mut self) -> Result<SignatureShare, WireError> {
        let signer = self.index()?;
        let value = self.element()?;
        let challenge = self.digest()?;
        let response = self.scalar()?;
        Ok(SignatureShare { signer, value, dleq_proof: DleqProof { challenge, response } })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_round_trip() {
        let mut w = Writer::new();
        w.u8(7).u32(0xdead_beef).u64(u64::MAX).bytes(b"abc");
        let bytes = w.into_bytes();
        let mut r = Reader::new(&bytes);
        assert_eq!(r.u8().unwrap(), 7);
        assert_eq!(r.u32().unwrap(), 0xdead_beef);
        assert_eq!(r.u64().unwrap(), u64::MAX);
        assert_eq!(r.bytes().unwrap(), b"abc");
        r.finish().unwrap();
    }

    #[test]
    fn zero_scalar_is_empty_magnitude() {
        let mut w = Writer::new();
        w.scalar(&Scalar::from_bytes_be_unchecked(&[0, 0]));
        assert_eq!(w.into_bytes(), vec![0]);
    }

    #[test]
    fn leading_zero_rejected() {
        let mut r = Reader::new(&[2, 0, 5]);
        assert_eq!(r.element(), Err(WireError::NonMinimal));
    }

    #[test]
    fn truncation_and_trailing() {
        assert_eq!(Reader::new(&[0, 0]).u32(), Err(WireError::Truncated));
        let r = Reader::new(&[1]);
        assert_eq!(r.finish(), Err(WireError::Trailing(1)));
    }
}
