//! Systematic (k, n) Reed–Solomon erasure code over GF(2^8).
//!
//! The blob `len:u32 ‖ data ‖ zero padding` is cut into k equal shards;
//! shard j holds the evaluations at x = j of the per-byte-column polynomial
//! of degree < k through the data shards (x = 0..k−1), so any k shards
//! determine the rest.

use std::sync::OnceLock;

const POLY: u16 = 0x11d;

struct Tables {
    exp: [u8; 512],
    log: [u8; 256],
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut exp = [0u8; 512];
        let mut log = [0u8; 256];
        let mut x: u16 = 1;
        for i in 0..255 {
            exp[i] = x as u8;
            log[x as usize] = i as u8;
            x <<= 1;
            if x & 0x100 != 0 {
                x ^= POLY;
            }
        }
        for i in 255..512 {
            exp[i] = exp[i - 255];
        }
        Tables { exp, log }
    })
}

pub fn gf_mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    let t = tables();
    t.exp[t.log[a as usize] as usize + t.log[b as usize] as usize]
}

pub fn gf_inv(a: u8) -> u8 {
    assert!(a != 0, "zero has no inverse");
    let t = tables();
    t.exp[255 - t.log[a as usize] as usize]
}

/// Coefficients c_m with P(x) = Σ c_m · P(xs[m]) for deg P < |xs|.
fn lagrange_row(xs: &[u8], x: u8) -> Vec<u8> {
    xs.iter()
        .enumerate()
        .map(|(m, &xm)| {
            let mut num = 1u8;
            let mut den = 1u8;
            for (l, &xl) in xs.iter().enumerate() {
                if l != m {
                    num = gf_mul(num, x ^ xl);
                    den = gf_mul(den, xm ^ xl);
                }
            }
            gf_mul(num, gf_inv(den))
        })
        .collect()
}

fn combine(rows: &[Vec<u8>], shards: &[&[u8]], len: usize) -> Vec<Vec<u8>> {
    let t = tables();
    rows.iter()
        .map(|row| {
            let mut out = vec![0u8; len];
            for (c, s) in row.iter().zip(shards) {
                if *c == 0 {
                    continue;
                }
                let lc = t.log[*c as usize] as usize;
                for (o, &b) in out.iter_mut().zip(s.iter()) {
                    if b != 0 {
                        *o ^= t.exp[lc + t.log[b as usize] as usize];
                    }
                }
            }
            out
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ErasureError {
    #[error("need {need} distinct shares, got {got}")]
    NotEnough { need: usize, got: usize },
    #[error("share index {0} out of range")]
    BadIndex(usize),
    #[error("shares have unequal length")]
    Ragged,
    #[error("length prefix inconsistent with shard size")]
    BadLength,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Code {
    pub k: usize,
    pub n: usize,
}

impl Code {
    pub fn new(k: usize, n: usize) -> Self {
        assert!(k >= 1 && k <= n && n <= 255, "invalid code ({k}, {n})");
        Code { k, n }
    }

    pub fn shard_len(&self, data_len: usize) -> usize {
        (data_len + 4).div_ceil(self.k).max(1)
    }

    /// All n shards of `data`.
    pub fn encode(&self, data: &[u8]) -> Vec<Vec<u8>> {
        let s = self.shard_len(data.len());
        let mut blob = Vec::with_capacity(s * self.k);
        blob.extend_from_slice(&(data.len() as u32).to_be_bytes());
        blob.extend_from_slice(data);
        blob.resize(s * self.k, 0);
        let mut shards: Vec<Vec<u8>> = blob.chunks(s).map(|c| c.to_vec()).collect();
        let xs: Vec<u8> = (0..self.k as u8).collect();
        let rows: Vec<Vec<u8>> = (self.k..self.n).map(|x| lagrange_row(&xs, x as u8)).collect();
        let refs: Vec<&[u8]> = shards.iter().map(|v| v.as_slice()).collect();
        let parity = combine(&rows, &refs, s);
        shards.extend(parity);
        shards
    }

    /// Rebuilds all n shards from any k of them.
    pub fn reconstruct_all(&self, shares: &[(usize, &[u8])]) -> Result<Vec<Vec<u8>>, ErasureError> {
        let picked = self.pick(shares)?;
        let s = picked[0].1.len();
        let xs: Vec<u8> = picked.iter().map(|(i, _)| *i as u8).collect();
        let refs: Vec<&[u8]> = picked.iter().map(|(_, d)| *d).collect();
        let rows: Vec<Vec<u8>> = (0..self.n).map(|x| lagrange_row(&xs, x as u8)).collect();
        Ok(combine(&rows, &refs, s))
    }

    /// Decodes the original bytes from any k shares.
    pub fn decode(&self, shares: &[(usize, &[u8])]) -> Result<Vec<u8>, ErasureError> {
        let picked = self.pick(shares)?;
        let s = picked[0].1.len();
        let xs: Vec<u8> = picked.iter().map(|(i, _)| *i as u8).collect();
        let refs: Vec<&[u8]> = picked.iter().map(|(_, d)| *d).collect();
        let rows: Vec<Vec<u8>> = (0..self.k).map(|x| lagrange_row(&xs, x as u8)).collect();
        let blob: Vec<u8> = combine(&rows, &refs, s).concat();
        let len = u32::from_be_bytes(blob[..4].try_into().unwrap()) as usize;
        if len + 4 > blob.len() || self.shard_len(len) != s {
            return Err(ErasureError::BadLength);
        }
        Ok(blob[4..4 + len].to_vec())
    }

    fn pick<'a>(&self, shares: &[(usize, &'a [u8])]) -> Result<Vec<(usize, &'a [u8])>, ErasureError> {
        let mut seen = vec![false; self.n];
        let mut picked = Vec::with_capacity(self.k);
        for &(i, d) in shares {
            if i >= self.n {
                return Err(ErasureError::BadIndex(i));
            }
            if !seen[i] {
                seen[i] = true;
                picked.push((i, d));
                if picked.len() == self.k {
                    break;
                }
            }
        }
        if picked.len() < self.k {
            return Err(ErasureError::NotEnough { need: self.k, got: picked.len() });
        }
        let s = picked[0].1.len();
        if s < 1 || picked.iter().any(|(_, d)| d.len() != s) {
            return Err(ErasureError::Ragged);
        }
        Ok(picked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn field_inverse() {
        for a in 1..=255u8 {
            assert_eq!(gf_mul(a, gf_inv(a)), 1);
        }
    }

    #[test]
    fn any_two_of_four() {
        let code = Code::new(2, 4);
        let data = b"the quick brown fox".to_vec();
        let shards = code.encode(&data);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let got = code.decode(&[(i, &shards[i]), (j, &shards[j])]).unwrap();
                    assert_eq!(got, data);
                }
            }
        }
    }

    #[test]
    fn all_shards_reconstruct() {
        let code = Code::new(3, 7);
        let data: Vec<u8> = (0..100).collect();
        let shards = code.encode(&data);
        let all: Vec<(usize, &[u8])> = shards.iter().enumerate().map(|(i, s)| (i, s.as_slice())).collect();
        assert_eq!(code.decode(&all).unwrap(), data);
        assert_eq!(code.reconstruct_all(&all[4..]).unwrap(), shards);
    }

    #[test]
    fn too_few_shares() {
        let code = Code::new(3, 4);
        let shards = code.encode(b"x");
        assert_eq!(
            code.decode(&[(0, &shards[0]), (0, &shards[0]), (1, &shards[1])]),
            Err(ErasureError::NotEnough { need: 3, got: 2 })
        );
    }

    proptest! {
        #[test]
        fn random_subsets_decode(data in proptest::collection::vec(any::<u8>(), 0..300), seed in any::<u64>()) {
            let code = Code::new(6, 16);
            let shards = code.encode(&data);
            let mut idx: Vec<usize> = (0..16).collect();
            let mut x = seed;
            for i in (1..16).rev() {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                idx.swap(i, (x >> 33) as usize % (i + 1));
            }
            let subset: Vec<(usize, &[u8])> = idx[..6].iter().map(|&i| (i, shards[i].as_slice())).collect();
            prop_assert_eq!(code.decode(&subset).unwrap(), data);
            prop_assert_eq!(code.reconstruct_all(&subset).unwrap(), shards);
        }
    }
}
