//! Deterministic keys and unit builders for tests and benches.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::unit::{Payload, Transaction, Unit};
use super::validate::Validator;
use crate::crypto::{Element, GroupBackend, SigningKey};
use crate::{NodeId, Round};

pub struct TestNet {
    pub backend: Arc<GroupBackend>,
    pub keys: Vec<SigningKey>,
}

impl TestNet {
    pub fn new(n: usize) -> Self {
        let backend = GroupBackend::sim();
        let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
        let keys = (0..n).map(|_| SigningKey::generate(&backend, &mut rng)).collect();
        TestNet { backend, keys }
    }

    pub fn public_keys(&self) -> Arc<Vec<Element>> {
        Arc::new(self.keys.iter().map(|k| k.public().clone()).collect())
    }

    pub fn validator(&self) -> Validator {
        Validator::new(self.backend.clone(), self.public_keys())
    }

    pub fn unit(&self, creator: NodeId, round: Round, parents: &[Arc<Unit>]) -> Arc<Unit> {
        self.unit_with(creator, round, parents, Payload::default())
    }

    pub fn unit_with_txs(
        &self,
        creator: NodeId,
        round: Round,
        parents: &[Arc<Unit>],
        txs: Vec<Transaction>,
    ) -> Arc<Unit> {
        self.unit_with(creator, round, parents, Payload::with_transactions(txs))
    }

    pub fn unit_with(&self, creator: NodeId, round: Round, parents: &[Arc<Unit>], payload: Payload) -> Arc<Unit> {
        let hashes = parents.iter().map(|p| p.hash()).collect();
        Arc::new(Unit::new_signed(&self.backend, &self.keys[creator], creator, round, hashes, payload))
    }
}
