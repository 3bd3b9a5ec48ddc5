use aleph_lab::crypto::threshold::{combine_with_coefficients, prove_dleq, verify_dleq};
use aleph_lab::crypto::vectors::{check_vector, compute_vector, ThresholdVector};
use aleph_lab::crypto::*;
use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

const VECTORS: &str = "tests/data/threshold_vectors.json";

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

#[test]
fn subsets_of_honest_shares_agree_with_dealer() {
    let b = GroupBackend::sim();
    let mut rng = ChaCha20Rng::seed_from_u64(100);
    for trial in 0..100 {
        let (a, keys) = generate_keys(&b, 7, 2, &mut rng).unwrap();
        let m = rng.next_u64().to_be_bytes();
        let shares: Vec<_> = (0..5).map(|i| create_share(&b, &m, keys.tk[i].as_ref().unwrap(), i)).collect();
        let oracle = b.exp(&b.hash_to_group(&m), &a.evaluate_at(&b, 0));
        let sets = if trial < 10 { subsets(5, 3) } else { vec![vec![0, 1, 2], vec![2, 3, 4]] };
        for s in sets {
            let picked: Vec<_> = s.iter().map(|&i| shares[i].clone()).collect();
            assert_eq!(generate_signature(&b, &m, &picked, &keys.vk, 2).unwrap(), oracle);
        }
    }
}

#[test]
fn dleq_rejects_every_tampered_exponent() {
    let b = GroupBackend::tiny();
    let q = b.q().to_u64_digits()[0];
    let (_, keys) = generate_keys(&b, 4, 1, &mut ChaCha20Rng::seed_from_u64(7)).unwrap();
    let tk = keys.tk[1].clone().unwrap();
    let base = b.hash_to_group(b"1|5");
    let honest = create_share_on(&b, &base, &tk, 1);
    assert!(verify_share_on(&b, &base, &honest, &keys.vk[1]));
    let mut accepted = 0u64;
    let mut forged_ok = 0u64;
    for x in 0..q {
        let x = b.scalar(x);
        if x == tk {
            continue;
        }
        let value = b.exp(&base, &x);
        let replayed = honest.dleq_proof.clone();
        if verify_dleq(&b, &base, &keys.vk[1], &value, &replayed) {
            accepted += 1;
        }
        let forged = prove_dleq(&b, &base, &x, &keys.vk[1], &value);
        if verify_dleq(&b, &base, &keys.vk[1], &value, &forged) {
            forged_ok += 1;
        }
    }
    assert_eq!(accepted, 0);
    // A prover with a wrong witness succeeds only when c ≡ 0 (mod q): about once per sweep.
    assert!(forged_ok <= 4, "{forged_ok} forged proofs accepted");
}

#[test]
fn f_shares_plus_guess_match_rarely() {
    let b = GroupBackend::tiny();
    let q = b.q().to_u64_digits()[0];
    let (a, keys) = generate_keys(&b, 4, 1, &mut ChaCha20Rng::seed_from_u64(8)).unwrap();
    let base = b.hash_to_group(b"0|9");
    let sigma = b.exp(&base, &a.evaluate_at(&b, 0));
    let known = create_share_on(&b, &base, keys.tk[0].as_ref().unwrap(), 0).value;
    let coeffs = lagrange_at_zero(&b, &[1, 2]).unwrap();
    let mut hits = 0u64;
    for y in 0..q {
        let guess = b.exp(&base, &b.scalar(y));
        if combine_with_coefficients(&b, [&known, &guess].into_iter(), &coeffs) == sigma {
            hits += 1;
        }
    }
    assert!(hits as f64 / q as f64 <= 2.0 / q as f64, "{hits} hits");
}

#[test]
fn frozen_vectors_recompute() {
    let text = std::fs::read_to_string(VECTORS).expect("vector file");
    let vectors: Vec<ThresholdVector> = serde_json::from_str(&text).unwrap();
    assert!(vectors.len() >= 6);
    for v in &vectors {
        assert!(check_vector(v).unwrap(), "vector seed {} nonce {}", v.seed, v.nonce);
    }
}

/// Writes the vector file; run with `--ignored` after a deliberate format change.
#[test]
#[ignore]
fn regenerate_vectors() {
    let mut out = Vec::new();
    for b in [GroupBackend::reference(), GroupBackend::sim(), GroupBackend::tiny()] {
        for (seed, nonce) in [(1u64, &b""[..]), (2, b"0|3"), (3, b"6|12")] {
            out.push(compute_vector(&b, seed, 4, 1, nonce).unwrap());
        }
    }
    out.push(compute_vector(&GroupBackend::reference(), 4, 7, 2, b"2|10").unwrap());
    std::fs::write(VECTORS, serde_json::to_string_pretty(&out).unwrap() + "\n").unwrap();
}

#[test]
fn hash_to_group_pinned() {
    let b = GroupBackend::tiny();
    let e = b.hash_to_group(b"");
    assert!(b.is_element(&e));
    assert_eq!(e, b.hash_to_group(b""));
    assert_ne!(e, b.hash_to_group(b"\0"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lagrange_identity_all_subsets(seed in any::<u64>(), f in 0usize..4) {
        let b = GroupBackend::sim();
        let n = (3 * f + 1).min(10);
        let a = Polynomial::random(&b, f, &mut ChaCha20Rng::seed_from_u64(seed));
        let secret = a.evaluate_at(&b, 0);
        for s in subsets(n, f + 1) {
            let idx: Vec<u64> = s.iter().map(|&i| i as u64 + 1).collect();
            let l = lagrange_at_zero(&b, &idx).unwrap();
            let mut acc = b.scalar(0);
            for (lj, x) in l.iter().zip(&idx) {
                acc = b.add(&acc, &b.mul_scalar(lj, &a.evaluate_at(&b, *x)));
            }
            prop_assert_eq!(&acc, &secret);
        }
    }

    #[test]
    fn dedicated_round_trip(seed in any::<u64>(), pt in proptest::collection::vec(any::<u8>(), 0..80)) {
        let b = GroupBackend::sim();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let keys = DedicatedKeyPairs::generate(&b, 2, &mut rng);
        let ct = enc_dedicated(&b, &keys.public, 1, 0, &pt);
        prop_assert_eq!(dec_dedicated(&b, keys.secret(1, 0), 1, 0, &ct).unwrap(), pt);
    }
}
