use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::chdag::fixtures::TestNet;
use crate::chdag::{ChDag, DagMode, Unit, UnitIdx};

/// Builds a dag round by round; `links(creator, round)` names the creators
/// whose previous-round units are parents. `None` skips the unit.
fn build(net: &TestNet, rounds: Round, links: impl Fn(NodeId, Round) -> Option<Vec<NodeId>>) -> (ChDag, Vec<Vec<Option<Arc<Unit>>>>) {
    let n = net.keys.len();
    let mut dag = ChDag::new(n, DagMode::Quick);
    let mut grid: Vec<Vec<Option<Arc<Unit>>>> = Vec::new();
    for r in 0..=rounds {
        let mut row = Vec::new();
        for c in 0..n {
            let u = if r == 0 {
                links(c, 0).map(|_| net.unit(c, 0, &[]))
            } else {
                links(c, r).map(|ps| {
                    let parents: Vec<Arc<Unit>> =
                        ps.iter().map(|&p| grid[r as usize - 1][p].clone().expect("missing parent")).collect();
                    net.unit(c, r, &parents)
                })
            };
            if let Some(u) = &u {
                dag.insert(u.clone()).unwrap();
            }
            row.push(u);
        }
        grid.push(row);
    }
    (dag, grid)
}

fn idx(dag: &ChDag, grid: &[Vec<Option<Arc<Unit>>>], c: NodeId, r: Round) -> UnitIdx {
    dag.lookup(&grid[r as usize][c].as_ref().unwrap().hash()).unwrap()
}

fn full(n: usize) -> impl Fn(NodeId, Round) -> Option<Vec<NodeId>> {
    move |_, _| Some((0..n).collect())
}

/// Creator 0's round-0 unit reaches nobody but creator 0.
fn isolated_target(c: NodeId, r: Round) -> Option<Vec<NodeId>> {
    match (c, r) {
        (_, 0) => Some(vec![]),
        (0, 1) => Some(vec![0, 1, 2]),
        (_, 1) => Some(vec![1, 2, 3]),
        (0, 2) => Some(vec![0, 1, 2]),
        (_, 2) => Some(vec![1, 2, 3]),
        (3, 3) => Some(vec![0, 1, 3]),
        (_, 3) => Some(vec![1, 2, 3]),
        _ => Some(vec![c, (c + 1) % 4, (c + 2) % 4]),
    }
}

#[test]
fn vote_next_round_is_the_parent_relation() {
    let net = TestNet::new(4);
    let (dag, g) = build(&net, 1, isolated_target);
    let mut bits = ScheduledSecrets::new(1);
    let mut v = Voting::new(ConsensusMode::Aleph);
    let u0 = idx(&dag, &g, 0, 0);
    assert_eq!(v.vote(u0, idx(&dag, &g, 0, 1), &dag, &mut bits), Some(true));
    assert_eq!(v.vote(u0, idx(&dag, &g, 1, 1), &dag, &mut bits), Some(false));
}

#[test]
fn vote_follows_unanimity_and_falls_back_to_common_vote() {
    let net = TestNet::new(4);
    let (dag, g) = build(&net, 4, isolated_target);
    let mut bits = ScheduledSecrets::new(1);
    let mut v = Voting::new(ConsensusMode::Aleph);
    let u0 = idx(&dag, &g, 0, 0);
    // Round 2, creator 0: parents vote {1, 0, 0}, CommonVote(U0, 2) = 1.
    assert_eq!(v.vote(u0, idx(&dag, &g, 0, 2), &dag, &mut bits), Some(true));
    assert_eq!(v.vote(u0, idx(&dag, &g, 1, 2), &dag, &mut bits), Some(false));
    // Round 3 = ρ(U0)+3 with split parents: CommonVote = 1.
    assert_eq!(v.vote(u0, idx(&dag, &g, 3, 3), &dag, &mut bits), Some(true));
    assert_eq!(v.vote(u0, idx(&dag, &g, 1, 3), &dag, &mut bits), Some(false));
    // Round 4 = ρ(U0)+4 with split parents: CommonVote = 0.
    let u = idx(&dag, &g, 3, 4);
    let split: Vec<_> = dag.round_parents(u).iter().map(|&p| v.vote(u0, p, &dag, &mut bits)).collect();
    assert!(split.contains(&Some(true)) && split.contains(&Some(false)));
    assert_eq!(v.vote(u0, u, &dag, &mut bits), Some(false));
}

#[test]
fn unit_decide_examples() {
    let net = TestNet::new(4);
    let (dag, g) = build(&net, 2, full(4));
    let mut bits = ScheduledSecrets::new(1);
    let mut v = Voting::new(ConsensusMode::Aleph);
    let u0 = idx(&dag, &g, 2, 0);
    assert_eq!(v.unit_decide(u0, idx(&dag, &g, 1, 1), &dag, &mut bits), UnitDecision::No);
    assert_eq!(v.unit_decide(u0, idx(&dag, &g, 1, 2), &dag, &mut bits), UnitDecision::Decided(true));

    let (dag, g) = build(&net, 2, isolated_target);
    let mut v = Voting::new(ConsensusMode::Aleph);
    let u0 = idx(&dag, &g, 0, 0);
    // Parents of (0, 2) vote {1, 0, 0}; of a unit seeing (0,1),(1,1),(2,1): {1, 0, 0}.
    assert_eq!(v.unit_decide(u0, idx(&dag, &g, 0, 2), &dag, &mut bits), UnitDecision::No);
}

#[test]
fn two_of_three_is_below_quorum() {
    let net = TestNet::new(4);
    let links = |c: NodeId, r: Round| match (c, r) {
        (_, 0) => Some(vec![]),
        (3, 1) => Some(vec![1, 2, 3]),
        (_, 1) => Some(vec![0, 1, 2, 3]),
        (0, 2) => Some(vec![0, 1, 3]),
        _ => Some(vec![0, 1, 2, 3]),
    };
    let (dag, g) = build(&net, 2, links);
    let mut bits = ScheduledSecrets::new(1);
    let mut v = Voting::new(ConsensusMode::Aleph);
    let u0 = idx(&dag, &g, 0, 0);
    assert_eq!(v.unit_decide(u0, idx(&dag, &g, 0, 2), &dag, &mut bits), UnitDecision::No);
    assert_eq!(v.unit_decide(u0, idx(&dag, &g, 1, 2), &dag, &mut bits), UnitDecision::Decided(true));
}

#[test]
fn decide_examples() {
    let net = TestNet::new(4);
    let mut bits = ScheduledSecrets::new(1);
    let (dag, g) = build(&net, 1, full(4));
    let mut v = Voting::new(ConsensusMode::Aleph).with_audit(true);
    assert_eq!(v.decide(idx(&dag, &g, 0, 0), &dag, &mut bits), Ok(None));

    let (dag, g) = build(&net, 2, full(4));
    let mut v = Voting::new(ConsensusMode::Aleph).with_audit(true).with_trace();
    assert_eq!(v.decide(idx(&dag, &g, 0, 0), &dag, &mut bits), Ok(Some(true)));
    let t = v.take_trace();
    assert_eq!((t.len(), t[0].decided_at, t[0].bit), (1, 2, true));
}

#[test]
fn crashed_creator_unit_is_decided_zero_at_plus_four() {
    let net = TestNet::new(4);
    let links = |c: NodeId, r: Round| match (c, r) {
        (_, 0) => Some(vec![]),
        (0, _) => None,
        _ => Some(vec![1, 2, 3]),
    };
    let mut bits = ScheduledSecrets::new(1);
    let (dag, g) = build(&net, 3, links);
    let u0 = idx(&dag, &g, 0, 0);
    assert_eq!(Voting::new(ConsensusMode::Aleph).decide(u0, &dag, &mut bits), Ok(None));
    let (dag, _) = build(&net, 4, links);
    let mut v = Voting::new(ConsensusMode::Aleph).with_trace();
    assert_eq!(v.decide(u0, &dag, &mut bits), Ok(Some(false)));
    assert_eq!(v.take_trace()[0].decided_at, 4);
}

#[test]
fn common_vote_patterns() {
    let dag = ChDag::new(4, DagMode::Quick);
    let mut none = ScheduledSecrets::new(3);
    assert_eq!(common_vote(ConsensusMode::Aleph, 0, 5, 7, &dag, &mut none), Some(true));
    assert_eq!(common_vote(ConsensusMode::Aleph, 0, 5, 8, &dag, &mut none), Some(true));
    assert_eq!(common_vote(ConsensusMode::Aleph, 0, 5, 9, &dag, &mut none), Some(false));
    assert_eq!(common_vote(ConsensusMode::Aleph, 0, 5, 10, &dag, &mut none), None);
    assert_eq!(common_vote(ConsensusMode::Quick, 0, 5, 7, &dag, &mut none), Some(true));
    assert_eq!(common_vote(ConsensusMode::Quick, 0, 5, 8, &dag, &mut none), Some(false));
    assert_eq!(common_vote(ConsensusMode::Quick, 0, 5, 9, &dag, &mut none), None);

    let net = TestNet::new(4);
    let (dag, _) = build(&net, 10, full(4));
    let mut s = ScheduledSecrets::new(3);
    let a = common_vote(ConsensusMode::Aleph, 2, 5, 10, &dag, &mut s).unwrap();
    assert_eq!(a, crate::crypto::hash_bytes(s.value(2, 10).as_bytes()).first_bit());
    let q = common_vote(ConsensusMode::Quick, 2, 5, 9, &dag, &mut s).unwrap();
    assert_eq!(q, s.value(2, 10).first_bit());
}

#[test]
fn permutation_examples() {
    let net = TestNet::new(4);
    let mut bits = ScheduledSecrets::new(9);
    let (dag, g) = build(&net, 4, |c, r| (r > 0 || c == 1).then(|| vec![1]).filter(|_| c == 1));
    let mut o = Orderer::new(Voting::new(ConsensusMode::Aleph), 0);
    assert_eq!(o.generate_permutation(0, &dag, &mut bits), Some(vec![idx(&dag, &g, 1, 0)]));
    assert_eq!(o.generate_permutation(1, &dag, &mut bits), None);

    let a = net.unit_with_txs(1, 0, &[], vec![b"a".to_vec()]);
    let b = net.unit_with_txs(1, 0, &[], vec![b"b".to_vec()]);
    let x = s_value(&mut bits, &dag, 1, 4);
    assert_ne!(priority(&x, a.canonical_encode()), priority(&x, b.canonical_encode()));
}

fn s_value(bits: &mut ScheduledSecrets, dag: &ChDag, i: NodeId, r: Round) -> crate::crypto::Digest {
    bits.secret_bits(i, r, dag).unwrap()
}

#[test]
fn quick_permutation_puts_default_creator_variants_first() {
    let net = TestNet::new(4);
    let mut dag = ChDag::new(4, DagMode::Quick);
    // DefaultIndex(1) = 1 (0-based): give creator 1 two round-1 variants.
    let r0: Vec<_> = (0..4).map(|c| net.unit(c, 0, &[])).collect();
    for u in &r0 {
        dag.insert(u.clone()).unwrap();
    }
    let mut r1: Vec<_> = (0..4).map(|c| net.unit(c, 1, &r0)).collect();
    r1.push(net.unit_with_txs(1, 1, &r0, vec![b"fork".to_vec()]));
    for u in &r1 {
        dag.insert(u.clone()).unwrap();
    }
    let mut o = Orderer::new(Voting::new(ConsensusMode::Quick), 0);
    let mut none = ScheduledSecrets { seed: 4, lag: 100 };
    assert_eq!(o.generate_permutation(1, &dag, &mut none), None);
    let mut prev = r1[..4].to_vec();
    for r in 2..=6 {
        let next: Vec<_> = (0..4).map(|c| net.unit(c, r, &prev)).collect();
        for u in &next {
            dag.insert(u.clone()).unwrap();
        }
        prev = next;
    }
    let mut variants: Vec<_> = [&r1[1], &r1[4]].iter().map(|u| dag.lookup(&u.hash()).unwrap()).collect();
    variants.sort_by_key(|&u| dag.hash(u));
    assert_eq!(o.generate_permutation(1, &dag, &mut none), Some(variants.clone()));
    let mut some = ScheduledSecrets::new(4);
    let full = o.generate_permutation(1, &dag, &mut some).unwrap();
    assert_eq!(full.len(), 5);
    assert_eq!(full[..2], variants[..]);
}

#[test]
fn choose_head_skips_units_decided_zero() {
    // Creator 0 crashes after round 0; its round-0 unit is decided 0.
    let net = TestNet::new(4);
    let links = |c: NodeId, r: Round| match (c, r) {
        (_, 0) => Some(vec![]),
        (0, _) => None,
        _ => Some(vec![1, 2, 3]),
    };
    let (dag, g) = build(&net, 12, links);
    let dead = idx(&dag, &g, 0, 0);
    for seed in 0..40 {
        let mut bits = ScheduledSecrets::new(seed);
        let mut o = Orderer::new(Voting::new(ConsensusMode::Aleph), 0);
        let perm = o.generate_permutation(0, &dag, &mut bits).unwrap();
        if perm[0] != dead {
            continue;
        }
        let head = o.choose_head(0, &dag, &mut bits).unwrap().unwrap();
        assert_eq!(head, perm[1]);
        assert_eq!(o.voting().decided(dead), Some(false));
        return;
    }
    panic!("no seed put the crashed unit first");
}

#[test]
fn empty_dag_orders_nothing() {
    let dag = ChDag::new(4, DagMode::Rbc);
    let mut bits = ScheduledSecrets::new(0);
    assert_eq!(order_units(&dag, ConsensusMode::Aleph, 0, &mut bits), LinearOrder::default());
}

/// Random fork-free dag: every unit links its own predecessor and at least
/// 2f other previous-round units. Up to f creators crash at random rounds.
fn random_units(net: &TestNet, rounds: Round, seed: u64) -> Vec<Arc<Unit>> {
    let n = net.keys.len();
    let f = (n - 1) / 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let crash: Vec<Round> = (0..n).map(|c| if c < f && rng.gen_bool(0.5) { rng.gen_range(1..rounds) } else { Round::MAX }).collect();
    let mut prev: Vec<Option<Arc<Unit>>> = (0..n).map(|c| Some(net.unit(c, 0, &[]))).collect();
    let mut all: Vec<Arc<Unit>> = prev.iter().flatten().cloned().collect();
    for r in 1..=rounds {
        let mut row = vec![None; n];
        for c in 0..n {
            if r >= crash[c] {
                continue;
            }
            let mut ps = vec![prev[c].clone().unwrap()];
            let mut others: Vec<Arc<Unit>> = (0..n).filter(|&x| x != c).filter_map(|x| prev[x].clone()).collect();
            while !others.is_empty() && (ps.len() < 2 * f + 1 || rng.gen_bool(0.5)) {
                let k = rng.gen_range(0..others.len());
                ps.push(others.swap_remove(k));
            }
            row[c] = Some(net.unit(c, r, &ps));
        }
        all.extend(row.iter().flatten().cloned());
        prev = row;
    }
    all
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn incremental_order_matches_oracle(seed in any::<u64>(), quick in any::<bool>(), lag in 0u32..3) {
        let mode = if quick { ConsensusMode::Quick } else { ConsensusMode::Aleph };
        let net = TestNet::new(4);
        let units = random_units(&net, 14, seed);
        let mut dag = ChDag::new(4, DagMode::Rbc);
        let mut bits = ScheduledSecrets { seed, lag };
        let mut o = Orderer::new(Voting::new(mode).with_audit(true), 0);
        let mut snapshots = Vec::new();
        for u in units {
            dag.insert(u).unwrap();
            o.update(&dag, &mut bits).unwrap();
            snapshots.push(o.linear_order(&dag));
        }
        let fin = o.linear_order(&dag);
        prop_assert!(!fin.heads.is_empty());
        for s in &snapshots {
            prop_assert!(s.is_prefix_of(&fin));
        }
        prop_assert_eq!(&fin, &order_units(&dag, mode, 0, &mut bits));
        // Causal extension.
        let pos: std::collections::HashMap<_, _> = fin.units.iter().enumerate().map(|(i, h)| (*h, i)).collect();
        for (h, &i) in &pos {
            let u = dag.lookup(h).unwrap();
            for &p in dag.parents(u) {
                prop_assert!(pos.get(&dag.hash(p)).is_some_and(|&j| j < i));
            }
        }
    }

    #[test]
    fn heads_agree_across_delivery_orders(seed in any::<u64>(), shuffle in any::<u64>()) {
        let net = TestNet::new(4);
        let units = random_units(&net, 12, seed);
        let mut bits = ScheduledSecrets::new(seed);
        let mut a = ChDag::new(4, DagMode::Rbc);
        for u in &units {
            a.insert(u.clone()).unwrap();
        }
        // A second node sees a random downward-closed prefix.
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        let cut = rng.gen_range(0..=units.len());
        let mut b = ChDag::new(4, DagMode::Rbc);
        for u in &units[..cut] {
            b.insert(u.clone()).unwrap();
        }
        let la = order_units(&a, ConsensusMode::Aleph, 0, &mut bits);
        let lb = order_units(&b, ConsensusMode::Aleph, 0, &mut bits);
        prop_assert!(lb.is_prefix_of(&la));
        prop_assert_eq!(&la.heads[..lb.heads.len()], &lb.heads[..]);
    }
}
