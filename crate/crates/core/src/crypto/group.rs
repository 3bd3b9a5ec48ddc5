//! Prime-order subgroup of Z_p* for a safe prime p = 2q + 1.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::hash::{expand, Hasher};
use super::CryptoError;

/// Element of the order-q subgroup.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(pub(crate) BigUint);

/// Integer in [0, q).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Scalar(pub(crate) BigUint);

impl Element {
    pub fn to_bytes_be(&self) -> Vec<u8> {
        self.0.to_bytes_be()
    }
    pub fn from_bytes_be_unchecked(b: &[u8]) -> Element {
        Element(BigUint::from_bytes_be(b))
    }
    pub fn value(&self) -> &BigUint {
        &self.0
    }
    pub fn to_hex(&self) -> String {
        self.0.to_str_radix(16)
    }
}

impl Scalar {
    pub fn to_bytes_be(&self) -> Vec<u8> {
        self.0.to_bytes_be()
    }
    pub fn from_bytes_be_unchecked(b: &[u8]) -> Scalar {
        Scalar(BigUint::from_bytes_be(b))
    }
    pub fn value(&self) -> &BigUint {
        &self.0
    }
    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
    pub fn to_hex(&self) -> String {
        self.0.to_str_radix(16)
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.to_hex();
        write!(f, "Element({})", &h[..h.len().min(12)])
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.to_hex();
        write!(f, "Scalar({})", &h[..h.len().min(12)])
    }
}

fn ser_big<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_str_radix(16))
}

fn de_big<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
    let s = String::deserialize(d)?;
    BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(|| serde::de::Error::custom("bad hex integer"))
}

impl Serialize for Element {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ser_big(&self.0, s)
    }
}
impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        de_big(d).map(Element)
    }
}
impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ser_big(&self.0, s)
    }
}
impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        de_big(d).map(Scalar)
    }
}

/// Public parameters of a backend, as written to test-vector files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendParams {
    pub name: String,
    pub p: String,
    pub q: String,
    pub g: String,
}

/// The group G = <g> of prime order q inside Z_p*, p = 2q + 1.
pub struct GroupBackend {
    name: String,
    p: BigUint,
    q: BigUint,
    g: Element,
    elem_len: usize,
    scalar_len: usize,
    small: Option<(u64, u64)>,
}

impl fmt::Debug for GroupBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupBackend({}, {} bits)", self.name, self.q.bits())
    }
}

const REF_Q: &str = "ffffffffffffffffffffffffffffffffffffffffffffffffffffffffffff8dcb";
const SIM_Q: u64 = 9_223_372_036_854_775_073;
const TINY_Q: u64 = 65_393;

impl GroupBackend {
    /// Builds a backend after checking p = 2q + 1, both prime, and ord(g) = q.
    pub fn new(name: &str, p: BigUint, q: BigUint, g: BigUint) -> Result<Self, CryptoError> {
        if p != &q * 2u32 + 1u32 {
            return Err(CryptoError::Config("p must equal 2q+1".into()));
        }
        if !is_probable_prime(&q) || !is_probable_prime(&p) {
            return Err(CryptoError::Config("p and q must be prime".into()));
        }
        if g <= BigUint::one() || g >= p || !g.modpow(&q, &p).is_one() {
            return Err(CryptoError::Config("g must have order q".into()));
        }
        let small = if p.bits() <= 64 { Some((p.to_u64().unwrap(), q.to_u64().unwrap())) } else { None };
        let elem_len = ((p.bits() + 7) / 8) as usize;
        let scalar_len = ((q.bits() + 7) / 8) as usize;
        Ok(GroupBackend { name: name.to_string(), p, q, g: Element(g), elem_len, scalar_len, small })
    }

    /// 256-bit q, used for integration tests.
    pub fn reference() -> Arc<Self> {
        let q = BigUint::parse_bytes(REF_Q.as_bytes(), 16).unwrap();
        let p = &q * 2u32 + 1u32;
        Arc::new(Self::new("ref256", p, q, BigUint::from(4u32)).unwrap())
    }

    /// 63-bit q with native arithmetic, for long simulations.
    pub fn sim() -> Arc<Self> {
        let q = BigUint::from(SIM_Q);
        let p = &q * 2u32 + 1u32;
        Arc::new(Self::new("sim63", p, q, BigUint::from(4u32)).unwrap())
    }

    /// q < 2^16, small enough for exhaustive adversaries.
    pub fn tiny() -> Arc<Self> {
        Self::small_prime("tiny16", TINY_Q)
    }

    /// Any safe-prime pair given by q.
    pub fn small_prime(name: &str, q: u64) -> Arc<Self> {
        let q = BigUint::from(q);
        let p = &q * 2u32 + 1u32;
        Arc::new(Self::new(name, p, q, BigUint::from(4u32)).expect("q must give a safe prime"))
    }

    /// Backend by name: `ref256`, `sim63`, `tiny16`.
    pub fn by_name(name: &str) -> Option<Arc<Self>> {
        match name {
            "ref256" | "reference" => Some(Self::reference()),
            "sim63" | "sim" => Some(Self::sim()),
            "tiny16" | "tiny" => Some(Self::tiny()),
            _ => None,
        }
    }

    pub fn from_params(params: &BackendParams) -> Result<Self, CryptoError> {
        let parse = |s: &str| {
            BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(|| CryptoError::Config(format!("bad hex {s}")))
        };
        Self::new(&params.name, parse(&params.p)?, parse(&params.q)?, parse(&params.g)?)
    }

    pub fn params(&self) -> BackendParams {
        BackendParams {
            name: self.name.clone(),
            p: self.p.to_str_radix(16),
            q: self.q.to_str_radix(16),
            g: self.g.0.to_str_radix(16),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn p(&self) -> &BigUint {
        &self.p
    }
    pub fn q(&self) -> &BigUint {
        &self.q
    }
    pub fn generator(&self) -> &Element {
        &self.g
    }
    pub fn element_len(&self) -> usize {
        self.elem_len
    }
    pub fn scalar_len(&self) -> usize {
        self.scalar_len
    }

    pub fn identity(&self) -> Element {
        Element(BigUint::one())
    }

    pub fn exp(&self, base: &Element, e: &Scalar) -> Element {
        match self.small {
            Some((p, _)) => {
                let b = base.0.to_u64().unwrap_or(0);
                let x = e.0.to_u64().unwrap_or(0);
                Element(BigUint::from(powmod(b, x, p)))
            }
            None => Element(base.0.modpow(&e.0, &self.p)),
        }
    }

    pub fn exp_g(&self, e: &Scalar) -> Element {
        self.exp(&self.g, e)
    }

    /// base^e for an arbitrary non-negative integer exponent.
    pub fn exp_big(&self, base: &Element, e: &BigUint) -> Element {
        self.exp(base, &Scalar(e % &self.q))
    }

    pub fn mul(&self, a: &Element, b: &Element) -> Element {
        match self.small {
            Some((p, _)) => Element(BigUint::from(mulmod(
                a.0.to_u64().unwrap_or(0),
                b.0.to_u64().unwrap_or(0),
                p,
            ))),
            None => Element((&a.0 * &b.0) % &self.p),
        }
    }

    /// True iff x is in the order-q subgroup.
    pub fn is_element(&self, x: &Element) -> bool {
        if x.0.is_zero() || x.0 >= self.p {
            return false;
        }
        match self.small {
            Some((p, q)) => powmod(x.0.to_u64().unwrap(), q, p) == 1,
            None => x.0.modpow(&self.q, &self.p).is_one(),
        }
    }

    pub fn is_scalar(&self, s: &Scalar) -> bool {
        s.0 < self.q
    }

    pub fn scalar(&self, v: u64) -> Scalar {
        Scalar(BigUint::from(v) % &self.q)
    }

    pub fn scalar_from_big(&self, v: &BigUint) -> Scalar {
        Scalar(v % &self.q)
    }

    pub fn add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.q)
    }

    pub fn sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &self.q - (&b.0 % &self.q)) % &self.q)
    }

    pub fn mul_scalar(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 * &b.0) % &self.q)
    }

    pub fn neg(&self, a: &Scalar) -> Scalar {
        self.sub(&Scalar(BigUint::zero()), a)
    }

    /// Multiplicative inverse mod q; `None` for zero.
    pub fn inv(&self, a: &Scalar) -> Option<Scalar> {
        if (&a.0 % &self.q).is_zero() {
            return None;
        }
        // q is prime: a^(q-2).
        let e = &self.q - 2u32;
        Some(Scalar(a.0.modpow(&e, &self.q)))
    }

    /// Uniform scalar from an RNG (64 extra bits, then reduced).
    pub fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Scalar {
        let mut buf = vec![0u8; self.scalar_len + 8];
        rng.fill_bytes(&mut buf);
        Scalar(BigUint::from_bytes_be(&buf) % &self.q)
    }

    /// Scalar derived from a hasher state.
    pub fn hash_to_scalar(&self, h: Hasher) -> Scalar {
        let d = h.finish();
        let wide = expand("scalar", &d.0, self.scalar_len + 8);
        Scalar(BigUint::from_bytes_be(&wide) % &self.q)
    }

    /// Maps bytes into the subgroup: rejection-sample x in [2, p-2], return x^2.
    pub fn hash_to_group(&self, m: &[u8]) -> Element {
        let bits = self.p.bits();
        let top_mask: u8 = match bits % 8 {
            0 => 0xff,
            r => (1u16 << r) as u8 - 1,
        };
        let p_minus_1 = &self.p - 1u32;
        let mut ctr = 0u64;
        loop {
            let mut seed = Vec::with_capacity(m.len() + 8);
            seed.extend_from_slice(m);
            seed.extend_from_slice(&ctr.to_be_bytes());
            let mut bytes = expand("hash-to-group", &seed, self.elem_len);
            bytes[0] &= top_mask;
            let x = BigUint::from_bytes_be(&bytes);
            if x > BigUint::one() && x < p_minus_1 {
                return Element((&x * &x) % &self.p);
            }
            ctr += 1;
        }
    }

    /// Fixed-width big-endian encoding.
    pub fn element_bytes(&self, e: &Element) -> Vec<u8> {
        fixed_width(&e.0, self.elem_len)
    }

    pub fn scalar_bytes(&self, s: &Scalar) -> Vec<u8> {
        fixed_width(&s.0, self.scalar_len)
    }

    /// Parses a fixed-width scalar; rejects wrong lengths and values ≥ q.
    pub fn scalar_from_bytes(&self, b: &[u8]) -> Result<Scalar, CryptoError> {
        if b.len() != self.scalar_len {
            return Err(CryptoError::Decode(format!("scalar length {} != {}", b.len(), self.scalar_len)));
        }
        let v = BigUint::from_bytes_be(b);
        if v >= self.q {
            return Err(CryptoError::Decode("scalar out of range".into()));
        }
        Ok(Scalar(v))
    }

    pub fn element_from_bytes(&self, b: &[u8]) -> Result<Element, CryptoError> {
        if b.len() != self.elem_len {
            return Err(CryptoError::Decode(format!("element length {} != {}", b.len(), self.elem_len)));
        }
        let e = Element(BigUint::from_bytes_be(b));
        if !self.is_element(&e) {
            return Err(CryptoError::Decode("not a subgroup element".into()));
        }
        Ok(e)
    }
}

fn fixed_width(v: &BigUint, len: usize) -> Vec<u8> {
    let raw = v.to_bytes_be();
    let raw: &[u8] = if v.is_zero() { &[] } else { &raw };
    let mut out = vec![0u8; len.saturating_sub(raw.len())];
    out.extend_from_slice(raw);
    out
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, b, m);
        }
        b = mulmod(b, b, m);
        e >>= 1;
    }
    acc
}

/// Miller-Rabin with fixed bases (deterministic below 3.3e24, and 24 rounds beyond).
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    const SMALL: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];
    for &sp in SMALL.iter() {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let n1 = n - 1u32;
    let mut d = n1.clone();
    let mut s = 0u32;
    while d.is_even() {
        d >>= 1;
        s += 1;
    }
    'witness: for &a in SMALL.iter() {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x.is_one() || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
