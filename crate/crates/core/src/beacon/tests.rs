use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::dealer::{deal, DealerCoin, DealerRules};
use super::keybox::KeyBox;
use super::multicoin::*;
use super::toss::{toss_share, TossCollector};
use super::Lagrange;
use crate::chdag::fixtures::TestNet;
use crate::chdag::{ChDag, DagMode, Payload, Unit, UnitIdx, Validator};
use crate::consensus::{ConsensusMode, Orderer, SecretSource, Voting};
use crate::crypto::{create_share_on, nonce, DedicatedKeyPairs, Element};
use crate::{NodeId, Round};

struct Trustless {
    net: TestNet,
    cfg: Arc<TrustlessConfig>,
    cache: Arc<SetupCache>,
    nodes: Vec<MultiCoinNode>,
    boxes: Vec<Option<KeyBox>>,
    validator: Validator,
    dag: ChDag,
}

impl Trustless {
    fn new(n: usize, garbage: &[NodeId], seed: u64) -> Self {
        let net = TestNet::new(n);
        let f = (n - 1) / 3;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pairs = DedicatedKeyPairs::generate(&net.backend, n, &mut rng);
        let cfg = Arc::new(TrustlessConfig { backend: net.backend.clone(), n, f, pks: Arc::new(pairs.public.clone()) });
        let cache = Arc::new(SetupCache::new());
        let mut nodes: Vec<MultiCoinNode> =
            (0..n).map(|i| MultiCoinNode::new(cfg.clone(), cache.clone(), i, pairs.recipient_keys(i))).collect();
        let boxes = nodes.iter_mut().map(|x| Some(x.make_key_box(garbage.contains(&x.me()), &mut rng))).collect();
        let validator = net.validator().with_rules(Arc::new(TrustlessRules::new(cfg.clone(), cache.clone())));
        Trustless { net, cfg, cache, nodes, boxes, validator, dag: ChDag::new(n, DagMode::Rbc) }
    }

    /// Adds units for `creators` at round `r`, each linking `links(c)` of
    /// round r−1 (creators), and validates them.
    fn round(&mut self, r: Round, creators: &[NodeId], links: impl Fn(NodeId) -> Vec<NodeId>) -> Vec<UnitIdx> {
        let mut made = Vec::new();
        for &c in creators {
            let parents: Vec<UnitIdx> =
                if r == 0 { vec![] } else { links(c).into_iter().map(|p| self.dag.unit_at(p, r - 1).unwrap()).collect() };
            let mut payload = Payload::default();
            let kb = self.boxes[c].take();
            self.nodes[c].fill_payload(&mut payload, r, &parents, &self.dag, kb);
            let hashes = parents.iter().map(|&p| self.dag.hash(p)).collect();
            made.push(Arc::new(Unit::new_signed(&self.net.backend, &self.net.keys[c], c, r, hashes, payload)));
        }
        let mut out = Vec::new();
        for u in made {
            self.validator.validate(&u, &self.dag).unwrap_or_else(|e| panic!("round {r}: {e:?}"));
            out.push(self.dag.insert(u).unwrap().index());
        }
        out
    }

    fn full_rounds(&mut self, upto: Round) {
        let all: Vec<NodeId> = (0..self.cfg.n).collect();
        let from = self.dag.height().map_or(0, |h| h + 1);
        for r in from..=upto {
            let a = all.clone();
            self.round(r, &all, move |_| a.clone());
        }
    }
}

#[test]
fn dealer_secret_appears_one_round_late_and_agrees() {
    let net = TestNet::new(4);
    let b = net.backend.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let keys = deal(&b, 4, 1, &mut rng);
    let vk = Arc::new(keys.vk.clone());
    let validator = net.validator().with_rules(Arc::new(DealerRules::new(b.clone(), vk)));
    let mut coins: Vec<DealerCoin> = (0..4).map(|i| DealerCoin::new(b.clone(), &keys, i)).collect();
    let mut dag = ChDag::new(4, DagMode::Rbc);
    let mut prev: Vec<Arc<Unit>> = Vec::new();
    for r in 0..3 {
        let row: Vec<Arc<Unit>> = (0..4)
            .map(|c| {
                let p = Payload { coin_share: coins[c].share(r), ..Payload::default() };
                net.unit_with(c, r, &prev, p)
            })
            .collect();
        for u in &row {
            validator.validate(u, &dag).unwrap();
            dag.insert(u.clone()).unwrap();
        }
        if r == 1 {
            assert_eq!(coins[0].secret_bits(0, 1, &dag), None);
        }
        prev = row;
    }
    let s0 = coins[0].secret_bits(0, 1, &dag).unwrap();
    assert_eq!(coins[3].secret_bits(2, 1, &dag), Some(s0));
    assert_ne!(coins[1].secret_bits(0, 0, &dag), Some(s0));

    // Every (f+1)-subset of the round-1 shares gives the same σ.
    let shares: Vec<(NodeId, Element)> = dag
        .units_at_round(1)
        .iter()
        .map(|&u| {
            let s = dag.unit(u).payload().coin_share.clone().unwrap();
            (s.signer, s.value)
        })
        .collect();
    let mut lg = Lagrange::new(b.clone());
    let mut seen = std::collections::HashSet::new();
    for a in 0..4 {
        for c in a + 1..4 {
            let sigma = lg.combine(&[(shares[a].0, &shares[a].1), (shares[c].0, &shares[c].1)]);
            seen.insert(sigma);
        }
    }
    assert_eq!(seen.len(), 1);

    // A unit with someone else's share is rejected.
    let p = Payload { coin_share: coins[1].share(3), ..Payload::default() };
    let bad = net.unit_with(0, 3, &prev, p);
    assert!(validator.validate(&bad, &dag).is_err());
}

#[test]
fn honest_trusted_sets_are_full() {
    let mut t = Trustless::new(4, &[], 1);
    t.full_rounds(6);
    for i in 0..4 {
        let ts = compute_trusted_set(&t.cfg, i, &t.dag).unwrap();
        assert_eq!(ts.members, vec![0, 1, 2, 3]);
    }
    assert!(compute_trusted_set(&t.cfg, 0, &ChDag::new(4, DagMode::Rbc)).is_none());
}

#[test]
fn garbage_dealer_is_voted_out() {
    let mut t = Trustless::new(4, &[2], 2);
    t.full_rounds(3);
    let u = t.dag.unit_at(0, 3).unwrap();
    let votes = &t.dag.unit(u).payload().key_votes;
    assert!(votes.iter().any(|v| v.dealer == 2 && !v.is_ok()));
    t.full_rounds(6);
    let ts = compute_trusted_set(&t.cfg, 1, &t.dag).unwrap();
    assert_eq!(ts.members, vec![0, 1, 3]);
}

#[test]
fn dealer_without_round_zero_below_is_excluded() {
    let mut t = Trustless::new(4, &[], 3);
    t.round(0, &[0, 1, 2, 3], |_| vec![]);
    // Nobody links node 3's round-0 unit; node 3 goes silent.
    for r in 1..=6 {
        t.round(r, &[0, 1, 2], |_| vec![0, 1, 2]);
    }
    let ts = compute_trusted_set(&t.cfg, 0, &t.dag).unwrap();
    assert_eq!(ts.members, vec![0, 1, 2]);
}

#[test]
fn bad_vote_with_forged_plaintext_is_rejected() {
    let mut t = Trustless::new(4, &[], 4);
    t.full_rounds(2);
    let parents: Vec<UnitIdx> = (0..4).map(|c| t.dag.unit_at(c, 2).unwrap()).collect();
    let mut payload = Payload::default();
    t.nodes[1].fill_payload(&mut payload, 3, &parents, &t.dag, None);
    payload.key_votes[0].verdict = super::keybox::Verdict::Bad(vec![7; 8]);
    let hashes = parents.iter().map(|&p| t.dag.hash(p)).collect();
    let u = Unit::new_signed(&t.net.backend, &t.net.keys[1], 1, 3, hashes, payload);
    let err = t.validator.validate(&u, &t.dag).unwrap_err();
    assert!(format!("{err:?}").contains("inadmissible"));
}

#[test]
fn aggregated_share_is_the_product_of_per_key_shares() {
    let mut t = Trustless::new(4, &[], 5);
    t.full_rounds(7);
    let k = 2;
    let u = t.dag.unit_at(k, 7).unwrap();
    let owners = t.cache.owners_for(k, 7, t.dag.parents(u), &t.dag);
    assert_eq!(owners, vec![0, 1, 2, 3]);
    let pairs = share_obligations(&t.cache, &t.cfg, k, &owners, &t.dag, None);
    assert_eq!(pairs.len(), 16);
    // Independent route: node k's per-dealer keys, one share per (i, j).
    let b = t.cfg.backend.clone();
    let pairs_keys = {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        DedicatedKeyPairs::generate(&b, 4, &mut rng)
    };
    for ms in &t.dag.unit(u).payload().multicoin {
        let base = b.hash_to_group(&nonce(ms.owner, 7));
        let mut prod = b.identity();
        for &(i, j) in pairs.iter().filter(|p| p.0 == ms.owner) {
            assert_eq!(i, ms.owner);
            let kb_unit = t.dag.unit_at(j, 0).unwrap();
            let kb = t.dag.unit(kb_unit).payload().key_box.clone().unwrap();
            let (_, key) = super::keybox::open_key(&b, pairs_keys.secret(j, k), &kb, k);
            let s = create_share_on(&b, &base, &key.unwrap(), k);
            prod = b.mul(&prod, &s.value);
        }
        assert_eq!(prod, ms.share.value);
    }
}

#[test]
fn multicoin_secrets_agree_and_need_round_plus_one() {
    let mut t = Trustless::new(4, &[], 6);
    t.full_rounds(9);
    assert_eq!(t.nodes[0].secret_bits(1, 9, &t.dag), None);
    t.full_rounds(10);
    let a = t.nodes[0].secret_bits(1, 9, &t.dag).unwrap();
    assert_eq!(t.nodes[3].secret_bits(1, 9, &t.dag), Some(a));
    assert_ne!(t.nodes[3].secret_bits(2, 9, &t.dag), Some(a));
}

fn combined_after_setup(t: &mut Trustless, rounds: Round) -> Vec<CombinedKeys> {
    t.full_rounds(rounds);
    let mut out = Vec::new();
    for i in 0..t.cfg.n {
        let mut o = Orderer::new(Voting::new(ConsensusMode::Aleph), SET_ROUND);
        let head = o.choose_head(SET_ROUND, &t.dag, &mut t.nodes[i]).unwrap().expect("head of round 6");
        out.push(t.nodes[i].combined_keys(head, &t.dag));
    }
    out
}

#[test]
fn setup_yields_consistent_combined_keys() {
    let mut t = Trustless::new(4, &[3], 7);
    let keys = combined_after_setup(&mut t, 14);
    let b = t.cfg.backend.clone();
    let members = keys[0].members.clone();
    assert!(!members.contains(&3));
    for k in &keys {
        assert_eq!(k.members, members);
        assert_eq!(k.keys.vk, keys[0].keys.vk);
        assert!(k.keys.held_keys_consistent(&b));
    }
    let correct = keys.iter().enumerate().filter(|(i, k)| k.keys.tk[*i].is_some()).count();
    assert_eq!(correct, 4);
    // g^{Σ A_k(0)} equals ∏ C_{k,0}.
    let mut joint = b.identity();
    for &j in &members {
        let u = t.dag.unit_at(j, 0).unwrap();
        joint = b.mul(&joint, &t.dag.unit(u).payload().key_box.as_ref().unwrap().commitment[0]);
    }
    assert_eq!(joint, keys[0].keys.joint_vk);

    // Toss: any f+1 holders give the same output.
    let mut outs = std::collections::HashSet::new();
    for skip in 0..4 {
        let mut c = TossCollector::new(&b, 11);
        let mut lg = Lagrange::new(b.clone());
        let mut out = None;
        for i in (0..4).filter(|&i| i != skip) {
            let s = toss_share(&b, &keys[i].keys, i, 11).unwrap();
            out = out.or(c.add(&b, &keys[0].keys, &s, &mut lg));
        }
        outs.insert(out.unwrap());
    }
    assert_eq!(outs.len(), 1);
}
