//! Transaction buffer with 1/N random sampling per unit.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chdag::Transaction;
use crate::crypto::hash_bytes;

/// First 16 bytes of the transaction hash.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TxId(pub [u8; 16]);

impl TxId {
    pub fn of(tx: &[u8]) -> TxId {
        let mut id = [0u8; 16];
        id.copy_from_slice(&hash_bytes(tx).as_bytes()[..16]);
        TxId(id)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

#[derive(Default)]
pub struct TxBuffer {
    pending: Vec<Transaction>,
    buffered: HashSet<TxId>,
    /// Seen in a local unit or already output.
    included: HashSet<TxId>,
}

impl TxBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn contains(&self, id: &TxId) -> bool {
        self.buffered.contains(id)
    }

    /// Returns whether the transaction was buffered.
    pub fn input_tx(&mut self, tx: Transaction) -> bool {
        let id = TxId::of(&tx);
        if self.included.contains(&id) || !self.buffered.insert(id) {
            return false;
        }
        self.pending.push(tx);
        true
    }

    /// Each buffered transaction independently with probability 1/n; the
    /// selected ones leave the buffer.
    pub fn select_payload<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Vec<Transaction> {
        let p = 1.0 / n.max(1) as f64;
        let mut keep = Vec::with_capacity(self.pending.len());
        let mut out = Vec::new();
        for tx in self.pending.drain(..) {
            if rng.gen_bool(p) {
                out.push(tx);
            } else {
                keep.push(tx);
            }
        }
        self.pending = keep;
        for tx in &out {
            self.buffered.remove(&TxId::of(tx));
        }
        out
    }

    /// Transactions that reached the local dag leave the buffer for good.
    pub fn mark_included<'a>(&mut self, txs: impl IntoIterator<Item = &'a Transaction>) {
        let mut hit = false;
        for tx in txs {
            let id = TxId::of(tx);
            self.included.insert(id);
            hit |= self.buffered.remove(&id);
        }
        if hit {
            let buffered = &self.buffered;
            self.pending.retain(|tx| buffered.contains(&TxId::of(tx)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicates_and_included_are_dropped() {
        let mut b = TxBuffer::new();
        assert!(b.input_tx(b"a".to_vec()));
        assert!(!b.input_tx(b"a".to_vec()));
        assert_eq!(b.len(), 1);
        b.mark_included([&b"a".to_vec()]);
        assert!(b.is_empty());
        assert!(!b.input_tx(b"a".to_vec()));
        assert!(b.input_tx(b"b".to_vec()));
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = TxBuffer::new();
        assert!(b.select_payload(4, &mut rng).is_empty());
        for i in 0..10u8 {
            b.input_tx(vec![i]);
        }
        assert_eq!(b.select_payload(1, &mut rng).len(), 10);
        assert!(b.is_empty());
    }

    #[test]
    fn batch_size_is_binomial() {
        // 1000 draws of Bin(200, 1/8): mean 25, sd of the mean sqrt(200·(1/8)(7/8)/1000).
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (m, n, draws) = (200usize, 8usize, 1000usize);
        let mut total = 0usize;
        for d in 0..draws {
            let mut b = TxBuffer::new();
            for i in 0..m {
                b.input_tx(format!("{d}-{i}").into_bytes());
            }
            total += b.select_payload(n, &mut rng).len();
        }
        let mean = total as f64 / draws as f64;
        let p = 1.0 / n as f64;
        let sd = (m as f64 * p * (1.0 - p) / draws as f64).sqrt();
        assert!((mean - m as f64 * p).abs() <= 3.0 * sd, "mean {mean}");
    }
}
