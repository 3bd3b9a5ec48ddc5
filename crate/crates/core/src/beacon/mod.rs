//! Randomness sources for the consensus: a trusted dealer and the
//! trustless setup built from key boxes and multicoins.

pub mod keybox;
pub mod dealer;
pub mod multicoin;
pub mod toss;

use std::collections::HashMap;
use std::sync::Arc;

use crate::crypto::{combine_with_coefficients, eval_point, lagrange_at_zero, Element, GroupBackend, Scalar};
use crate::NodeId;

/// Lagrange coefficients at zero, computed once per signer set.
pub struct Lagrange {
    backend: Arc<GroupBackend>,
    cache: HashMap<Vec<NodeId>, Vec<Scalar>>,
}

impl Lagrange {
    pub fn new(backend: Arc<GroupBackend>) -> Self {
        Lagrange { backend, cache: HashMap::new() }
    }

    pub fn coefficients(&mut self, signers: &[NodeId]) -> &[Scalar] {
        let b = &self.backend;
        self.cache.entry(signers.to_vec()).or_insert_with(|| {
            let idx: Vec<u64> = signers.iter().map(|&i| eval_point(i)).collect();
            lagrange_at_zero(b, &idx).expect("distinct signers")
        })
    }

    /// ∏ s_j^{λ_j} over distinct signers.
    pub fn combine(&mut self, shares: &[(NodeId, &Element)]) -> Element {
        let signers: Vec<NodeId> = shares.iter().map(|s| s.0).collect();
        let b = self.backend.clone();
        let coeffs = self.coefficients(&signers);
        combine_with_coefficients(&b, shares.iter().map(|s| s.1), coeffs)
    }
}

#[cfg(test)]
mod tests;
