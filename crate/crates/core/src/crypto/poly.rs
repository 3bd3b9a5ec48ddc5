//! Polynomials over Z_q and their Feldman-style commitments.

use serde::{Deserialize, Serialize};

use rand::RngCore;

use super::group::{Element, GroupBackend, Scalar};

/// Coefficients a_0..a_f, lowest degree first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<Scalar>,
}

impl Polynomial {
    pub fn random<R: RngCore + ?Sized>(b: &GroupBackend, degree: usize, rng: &mut R) -> Self {
        Polynomial { coeffs: (0..=degree).map(|_| b.random_scalar(rng)).collect() }
    }

    pub fn from_coefficients(coeffs: Vec<Scalar>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least one coefficient");
        Polynomial { coeffs }
    }

    /// A(x) = c with `degree + 1` stored coefficients.
    pub fn constant(c: Scalar, degree: usize) -> Self {
        let mut coeffs = vec![Scalar::default(); degree + 1];
        coeffs[0] = c;
        Polynomial { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[Scalar] {
        &self.coeffs
    }

    pub fn evaluate(&self, b: &GroupBackend, x: &Scalar) -> Scalar {
        let mut acc = Scalar::default();
        for c in self.coeffs.iter().rev() {
            acc = b.add(&b.mul_scalar(&acc, x), c);
        }
        acc
    }

    pub fn evaluate_at(&self, b: &GroupBackend, x: u64) -> Scalar {
        self.evaluate(b, &b.scalar(x))
    }

    /// (g^{a_0}, …, g^{a_f}).
    pub fn commitment(&self, b: &GroupBackend) -> Vec<Element> {
        self.coeffs.iter().map(|c| b.exp_g(c)).collect()
    }

    pub fn add(&self, b: &GroupBackend, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let zero = Scalar::default();
        let coeffs = (0..len)
            .map(|i| b.add(self.coeffs.get(i).unwrap_or(&zero), other.coeffs.get(i).unwrap_or(&zero)))
            .collect();
        Polynomial { coeffs }
    }
}

/// g^{A(x)} from a commitment: ∏_j C_j^{x^j}.
pub fn eval_commitment(b: &GroupBackend, commitment: &[Element], x: u64) -> Element {
    let xs = b.scalar(x);
    let mut power = b.scalar(1);
    let mut acc = b.identity();
    for c in commitment {
        acc = b.mul(&acc, &b.exp(c, &power));
        power = b.mul_scalar(&power, &xs);
    }
    acc
}
