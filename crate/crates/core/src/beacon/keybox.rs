//! Key boxes and key votes.
//!
//! Dealer k samples a degree-f polynomial A_k, publishes the commitment
//! C_k = (g^{a_{k,0}}, …, g^{a_{k,f}}) and encrypts tk_{k,i} = A_k(i+1)
//! for every node i under the dedicated pair key pk_{k→i}.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::crypto::{
    dec_dedicated, enc_dedicated, eval_commitment, eval_point, Ciphertext, DedicatedPublicKeys, Element,
    GroupBackend, Polynomial, Scalar,
};
use crate::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyBox {
    pub dealer: NodeId,
    pub commitment: Vec<Element>,
    pub encrypted: Vec<Ciphertext>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Ok,
    /// The decrypted tossing key, published so that anyone can re-encrypt it.
    Bad(Vec<u8>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyVote {
    pub voter: NodeId,
    pub dealer: NodeId,
    pub verdict: Verdict,
}

impl KeyVote {
    pub fn is_ok(&self) -> bool {
        matches!(self.verdict, Verdict::Ok)
    }
}

/// What the dealer keeps after building its box: only its own key.
#[derive(Clone, Debug)]
pub struct DealerSecret {
    pub dealer: NodeId,
    pub own_key: Scalar,
}

impl KeyBox {
    /// vk_{k,i} derived from the commitment.
    pub fn verification_key(&self, b: &GroupBackend, i: NodeId) -> Element {
        eval_commitment(b, &self.commitment, eval_point(i))
    }

    pub fn verification_keys(&self, b: &GroupBackend, n: usize) -> Vec<Element> {
        (0..n).map(|i| self.verification_key(b, i)).collect()
    }

    /// Shape check: f+1 subgroup elements and N ciphertexts.
    pub fn well_formed(&self, b: &GroupBackend, n: usize, f: usize) -> bool {
        self.commitment.len() == f + 1
            && self.encrypted.len() == n
            && self.commitment.iter().all(|c| b.is_element(c))
    }
}

/// Builds KB_k. The polynomial is dropped before returning.
pub fn build_key_box<R: RngCore + ?Sized>(
    b: &GroupBackend,
    pks: &DedicatedPublicKeys,
    k: NodeId,
    n: usize,
    f: usize,
    rng: &mut R,
) -> (KeyBox, DealerSecret) {
    let a = Polynomial::random(b, f, rng);
    key_box_from_polynomial(b, pks, k, n, &a)
}

pub fn key_box_from_polynomial(
    b: &GroupBackend,
    pks: &DedicatedPublicKeys,
    k: NodeId,
    n: usize,
    a: &Polynomial,
) -> (KeyBox, DealerSecret) {
    let keys: Vec<Scalar> = (0..n).map(|i| a.evaluate_at(b, eval_point(i))).collect();
    let encrypted = keys
        .iter()
        .enumerate()
        .map(|(i, tk)| enc_dedicated(b, pks, k, i, &b.scalar_bytes(tk)))
        .collect();
    let kb = KeyBox { dealer: k, commitment: a.commitment(b), encrypted };
    (kb, DealerSecret { dealer: k, own_key: keys[k].clone() })
}

/// Decrypts e_{k,i}; returns the plaintext and the key when it parses.
pub fn open_key(b: &GroupBackend, sk: &Scalar, kb: &KeyBox, i: NodeId) -> (Vec<u8>, Option<Scalar>) {
    let Some(ct) = kb.encrypted.get(i) else {
        return (Vec::new(), None);
    };
    match dec_dedicated(b, sk, kb.dealer, i, ct) {
        Ok(pt) => {
            let key = b.scalar_from_bytes(&pt).ok();
            (pt, key)
        }
        Err(_) => (Vec::new(), None),
    }
}

/// VerKey(KB_k, i): ok iff the decrypted key matches vk_{k,i}.
pub fn vote_key_box(b: &GroupBackend, sk: &Scalar, kb: &KeyBox, i: NodeId) -> (KeyVote, Option<Scalar>) {
    let (pt, key) = open_key(b, sk, kb, i);
    let good = key.as_ref().is_some_and(|tk| b.exp_g(tk) == kb.verification_key(b, i));
    let verdict = if good { Verdict::Ok } else { Verdict::Bad(pt) };
    (KeyVote { voter: i, dealer: kb.dealer, verdict }, if good { key } else { None })
}

/// Public check of a vote. An ok vote is always admissible; a bad vote must
/// carry a plaintext that re-encrypts to e_{k,i} and is not the right key.
pub fn vote_is_admissible(b: &GroupBackend, pks: &DedicatedPublicKeys, kb: &KeyBox, vote: &KeyVote) -> bool {
    match &vote.verdict {
        Verdict::Ok => true,
        Verdict::Bad(pt) => {
            let Some(ct) = kb.encrypted.get(vote.voter) else {
                return false;
            };
            if &enc_dedicated(b, pks, kb.dealer, vote.voter, pt) != ct {
                return false;
            }
            match b.scalar_from_bytes(pt) {
                Ok(tk) => b.exp_g(&tk) != kb.verification_key(b, vote.voter),
                Err(_) => true,
            }
        }
    }
}

/// Replaces the encrypted keys for `victims` with encryptions of garbage.
pub fn corrupt_key_box<R: RngCore + ?Sized>(
    b: &GroupBackend,
    pks: &DedicatedPublicKeys,
    kb: &mut KeyBox,
    victims: &[NodeId],
    rng: &mut R,
) {
    for &i in victims {
        let junk = b.random_scalar(rng);
        kb.encrypted[i] = enc_dedicated(b, pks, kb.dealer, i, &b.scalar_bytes(&junk));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::DedicatedKeyPairs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup(n: usize) -> (std::sync::Arc<GroupBackend>, DedicatedKeyPairs, ChaCha20Rng) {
        let b = GroupBackend::sim();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let dk = DedicatedKeyPairs::generate(&b, n, &mut rng);
        (b, dk, rng)
    }

    #[test]
    fn honest_box_verifies_for_everyone() {
        let (b, dk, mut rng) = setup(4);
        let (kb, sec) = build_key_box(&b, &dk.public, 2, 4, 1, &mut rng);
        assert_eq!(kb.commitment.len(), 2);
        for i in 0..4 {
            let (vote, key) = vote_key_box(&b, dk.secret(2, i), &kb, i);
            assert!(vote.is_ok());
            assert!(key.is_some());
        }
        assert_eq!(b.exp_g(&sec.own_key), kb.verification_key(&b, 2));
    }

    #[test]
    fn targeted_corruption_only_hits_victim() {
        let (b, dk, mut rng) = setup(4);
        let (mut kb, _) = build_key_box(&b, &dk.public, 0, 4, 1, &mut rng);
        corrupt_key_box(&b, &dk.public, &mut kb, &[3], &mut rng);
        for i in 0..4 {
            let (vote, _) = vote_key_box(&b, dk.secret(0, i), &kb, i);
            assert_eq!(vote.is_ok(), i != 3);
            assert!(vote_is_admissible(&b, &dk.public, &kb, &vote));
        }
    }

    #[test]
    fn false_accusation_is_inadmissible() {
        let (b, dk, mut rng) = setup(4);
        let (kb, _) = build_key_box(&b, &dk.public, 0, 4, 1, &mut rng);
        let (pt, _) = open_key(&b, dk.secret(0, 1), &kb, 1);
        let lie = KeyVote { voter: 1, dealer: 0, verdict: Verdict::Bad(vec![1, 2, 3]) };
        assert!(!vote_is_admissible(&b, &dk.public, &kb, &lie));
        let honest_key_as_bad = KeyVote { voter: 1, dealer: 0, verdict: Verdict::Bad(pt) };
        assert!(!vote_is_admissible(&b, &dk.public, &kb, &honest_key_as_bad));
    }
}
