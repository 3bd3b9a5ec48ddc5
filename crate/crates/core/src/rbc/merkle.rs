//! Binary Merkle tree over erasure shares.
//!
//! Leaf j is H("leaf", j, share); an odd level duplicates its last node.

use crate::crypto::{Digest, Hasher};

pub fn leaf(index: usize, share: &[u8]) -> Digest {
    let mut h = Hasher::new("merkle-leaf");
    h.u64(index as u64).part(share);
    h.finish()
}

fn node(l: &Digest, r: &Digest) -> Digest {
    let mut h = Hasher::new("merkle-node");
    h.part(l.as_bytes()).part(r.as_bytes());
    h.finish()
}

fn next_level(level: &[Digest]) -> Vec<Digest> {
    level
        .chunks(2)
        .map(|c| node(&c[0], c.get(1).unwrap_or(&c[0])))
        .collect()
}

pub struct MerkleTree {
    levels: Vec<Vec<Digest>>,
}

impl MerkleTree {
    pub fn build(shares: &[Vec<u8>]) -> Self {
        assert!(!shares.is_empty());
        let mut levels = vec![shares.iter().enumerate().map(|(i, s)| leaf(i, s)).collect::<Vec<_>>()];
        while levels.last().unwrap().len() > 1 {
            let next = next_level(levels.last().unwrap());
            levels.push(next);
        }
        MerkleTree { levels }
    }

    pub fn root(&self) -> Digest {
        self.levels.last().unwrap()[0]
    }

    /// Sibling path from leaf `index` up to the root.
    pub fn branch(&self, index: usize) -> Vec<Digest> {
        let mut out = Vec::new();
        let mut i = index;
        for level in &self.levels[..self.levels.len() - 1] {
            let sib = i ^ 1;
            out.push(*level.get(sib).unwrap_or(&level[i]));
            i /= 2;
        }
        out
    }
}

pub fn root_of(shares: &[Vec<u8>]) -> Digest {
    MerkleTree::build(shares).root()
}

/// Checks that `share` sits at `index` of an `n`-leaf tree with `root`.
pub fn verify(root: &Digest, n: usize, index: usize, share: &[u8], branch: &[Digest]) -> bool {
    if index >= n {
        return false;
    }
    let depth = usize::BITS - (n.max(1) - 1).leading_zeros();
    if branch.len() != depth as usize {
        return false;
    }
    let mut acc = leaf(index, share);
    let mut i = index;
    for sib in branch {
        acc = if i % 2 == 0 { node(&acc, sib) } else { node(sib, &acc) };
        i /= 2;
    }
    acc == *root
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches_verify() {
        for n in 1..=17 {
            let shares: Vec<Vec<u8>> = (0..n).map(|i| vec![i as u8; 5]).collect();
            let t = MerkleTree::build(&shares);
            for i in 0..n {
                assert!(verify(&t.root(), n, i, &shares[i], &t.branch(i)), "n={n} i={i}");
            }
        }
    }

    #[test]
    fn tampered_share_fails() {
        let shares: Vec<Vec<u8>> = (0..4).map(|i| vec![i as u8; 5]).collect();
        let t = MerkleTree::build(&shares);
        let mut bad = shares[2].clone();
        bad[0] ^= 1;
        assert!(!verify(&t.root(), 4, 2, &bad, &t.branch(2)));
        assert!(!verify(&t.root(), 4, 3, &shares[2], &t.branch(2)));
    }
}
