//! The acceptance criteria, runnable by number or name.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Instant;

use crate::abcast::attack::{fork_bomb, AttackConfig};
use crate::abcast::scenario::ScenarioOptions;
use crate::abcast::Scenario;
use crate::beacon::dealer::DealerCoin;
use crate::chdag::{ChDag, DagMode};
use crate::consensus::{ConsensusMode, Orderer, Voting};
use crate::crypto::threshold::combine_with_coefficients;
use crate::crypto::*;
use crate::netsim::{BeaconKind, Behavior, SchedulerKind, SimConfig};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use ConsensusMode::{Aleph, Quick};

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

fn outcome(failures: &[String], summary: String) -> Outcome {
    if failures.is_empty() {
        Outcome { pass: true, detail: summary }
    } else {
        let shown: Vec<&str> = failures.iter().take(4).map(|s| s.as_str()).collect();
        Outcome { pass: false, detail: format!("{summary}; {} failure(s): {}", failures.len(), shown.join(" | ")) }
    }
}

fn base(n: usize, mode: ConsensusMode, seed: u64) -> SimConfig {
    SimConfig { n, mode, seed, ..SimConfig::default() }
}

fn f_of(n: usize) -> usize {
    (n - 1) / 3
}

// 1 ────────────────────────────────────────────────────────────────────────

fn safety() -> Outcome {
    let mut failures = Vec::new();
    let mut runs = 0;
    let mut heads = usize::MAX;
    for &n in &[4usize, 7, 16] {
        for i in 0..50u64 {
            let seed = 1_000 * n as u64 + i;
            let mode = if i % 2 == 0 { Aleph } else { Quick };
            let behavior = if (i / 2) % 2 == 0 { Behavior::Forker { variants: 2 } } else { Behavior::EquivocatingProposer };
            let mut cfg = base(n, mode, seed).with_byzantine(&[behavior]);
            cfg.scheduler = SchedulerKind::AdversarialDelay { slow: f_of(n), max_delay: None };
            cfg.tx_rate = 0.3;
            let opts = ScenarioOptions { audit: true, ..ScenarioOptions::default() };
            let mut s = Scenario::with_options(cfg, opts).unwrap();
            let target = if n == 16 { 6 } else { 10 };
            match s.run_until(60_000, |s| s.min_honest_heads() >= target) {
                Ok(true) => {}
                Ok(false) => failures.push(format!("seed {seed} (N={n}, {mode:?}): stalled at {} heads", s.min_honest_heads())),
                Err(e) => {
                    failures.push(format!("seed {seed}: {e}"));
                    continue;
                }
            }
            runs += 1;
            heads = heads.min(s.min_honest_heads());
            if !s.agreement() {
                failures.push(format!("seed {seed}: honest logs diverge"));
            }
            for node in s.honest_nodes() {
                for fault in &node.rec.faults {
                    failures.push(format!("seed {seed} node {}: {fault}", node.me));
                }
            }
            let mut bits: HashMap<Digest, bool> = HashMap::new();
            for node in s.honest_nodes() {
                for (u, b) in node.orderer().voting_ref().decisions() {
                    if let Some(&prev) = bits.get(&node.dag.hash(u)) {
                        if prev != b {
                            failures.push(format!("seed {seed}: conflicting decisions across nodes"));
                        }
                    }
                    bits.insert(node.dag.hash(u), b);
                }
            }
        }
    }
    outcome(&failures, format!("{runs} adversarial runs over N in {{4,7,16}}, min heads per run {heads}, 0 violations required"))
}

// 2 ────────────────────────────────────────────────────────────────────────

fn censorship() -> Outcome {
    let mut failures = Vec::new();
    let mut drained = 0;
    let mut txs = 0;
    for i in 0..50u64 {
        let n = [4usize, 7][(i % 2) as usize];
        let seed = 2_000 + i;
        let mode = if (i / 2) % 2 == 0 { Aleph } else { Quick };
        let mut cfg = base(n, mode, seed);
        if i % 3 == 0 {
            cfg = cfg.with_byzantine(&[Behavior::Forker { variants: 2 }]);
        }
        cfg.tx_rate = 0.5;
        cfg.tx_fanout = 1;
        let mut s = Scenario::new(cfg).unwrap();
        s.run_until(30 * n as u64 * 10, |_| false).unwrap();
        s.cfg.tx_rate = 0.0;
        let ids: Vec<_> = s.inputs.keys().copied().collect();
        txs += ids.len();
        let done = s
            .run_until(80_000, |s| s.honest_nodes().all(|node| ids.iter().all(|id| node.log.contains(id))))
            .unwrap();
        if done {
            drained += 1;
        } else {
            let missing = s.honest_nodes().map(|node| ids.iter().filter(|id| !node.log.contains(id)).count()).max().unwrap();
            failures.push(format!("seed {seed} (N={n}, {mode:?}): {missing} txs never output"));
        }
    }
    outcome(&failures, format!("{drained}/50 fair runs drained, {txs} single-node txs"))
}

// 3 ────────────────────────────────────────────────────────────────────────

fn choose_head_latency() -> Outcome {
    let seed = 3_016;
    let mut cfg = base(16, Aleph, seed);
    cfg.tx_rate = 0.2;
    let opts = ScenarioOptions { probe_heads: true, ..ScenarioOptions::default() };
    let mut s = Scenario::with_options(cfg, opts).unwrap();
    let rounds = 300u32;
    s.run_until(2_000_000, |s| s.min_honest_heads() >= rounds as usize).unwrap();
    let mut z: Vec<u32> = Vec::new();
    for r in 0..rounds {
        let worst = s.honest_nodes().filter_map(|node| node.rec.head_ready.get(&r).map(|&h| h - r)).max();
        match worst {
            Some(l) => z.push(l),
            None => return outcome(&[format!("seed {seed}: round {r} never probed")], String::new()),
        }
    }
    let mut delays = Vec::new();
    for node in s.honest_nodes() {
        delays.extend(node.rec.heads.iter().take(rounds as usize).map(|h| (h.height - h.round) as f64));
    }
    let mean = delays.iter().sum::<f64>() / delays.len() as f64;
    let total = z.len() as f64;
    let count = |k: u32| z.iter().filter(|&&l| l >= k).count();
    let tail = |k: u32| count(k) as f64 / total;
    let mut failures = Vec::new();
    let max_z = *z.iter().max().unwrap();
    let mut tails = Vec::new();
    for k in 1..=max_z + 1 {
        tails.push(format!("P(Z>={k})={:.3}", tail(k)));
    }
    for k in 6..=max_z {
        // Geometric envelope anchored at K = 6.
        let bound = tail(6) * 0.7f64.powi((k - 6) as i32);
        if tail(k) > bound + 1e-12 {
            failures.push(format!("seed {seed}: P(Z>={k}) = {:.4} above {:.4}", tail(k), bound));
        }
        // Step ratio, on counts large enough to estimate it.
        if count(k) >= 10 && 10 * count(k + 1) > 7 * count(k) {
            failures.push(format!("seed {seed}: ratio at K={k} is {:.2}", tail(k + 1) / tail(k)));
        }
    }
    if mean > 8.0 {
        failures.push(format!("seed {seed}: mean head delay {mean:.2}"));
    }
    outcome(&failures, format!("N=16, {rounds} rounds, mean head delay {mean:.2} dag-rounds, {}", tails.join(" ")))
}

// 4 ────────────────────────────────────────────────────────────────────────

fn fast_decisions() -> Outcome {
    let mut failures = Vec::new();
    let mut rounds_checked = 0;
    for i in 0..12u64 {
        let n = [4usize, 7][(i % 2) as usize];
        let seed = 4_000 + i;
        let mut cfg = base(n, Aleph, seed);
        if i % 3 == 1 {
            cfg.scheduler = SchedulerKind::AdversarialDelay { slow: f_of(n), max_delay: None };
        }
        if i % 4 == 2 {
            cfg = cfg.with_byzantine(&[Behavior::Forker { variants: 2 }]);
        }
        let opts = ScenarioOptions { snapshots: true, ..ScenarioOptions::default() };
        let mut s = Scenario::with_options(cfg, opts).unwrap();
        s.run_until(100_000, |s| s.min_honest_heads() >= 15).unwrap();
        let honest: Vec<usize> = s.honest().to_vec();
        let f = f_of(n);
        let mut ones: BTreeMap<u32, HashSet<Digest>> = BTreeMap::new();
        for &h in &honest {
            let node = &mut s.world.nodes[h];
            let top = node.rec.heads.last().map(|x| x.round).unwrap_or(0);
            for r in 0..=top {
                let layer: Vec<usize> = node.dag.units_at_round(r).to_vec();
                let mut count = 0;
                for u in layer {
                    if let Ok(Some(true)) = node.decide(u) {
                        count += 1;
                        ones.entry(r).or_default().insert(node.dag.hash(u));
                    }
                }
                rounds_checked += 1;
                if count < 2 * f + 1 {
                    failures.push(format!("seed {seed} node {h}: round {r} has {count} units decided 1"));
                }
            }
        }
        for &h in &honest {
            let snaps = s.world.nodes[h].rec.snapshots.as_ref().unwrap();
            for (r, decided) in &ones {
                if let Some(present) = snaps.get(r) {
                    for d in decided.difference(present) {
                        failures.push(format!("seed {seed}: {} decided 1 but absent from node {h} at height {}", &d.to_hex()[..8], r + 4));
                    }
                }
            }
        }
    }
    outcome(&failures, format!("12 runs, {rounds_checked} (node, round) pairs checked"))
}

// 5 ────────────────────────────────────────────────────────────────────────

fn rbc() -> Outcome {
    let mut failures = Vec::new();
    let mut instances = 0;
    let mut worst_latency = 0;
    let mut worst_gap = 0;
    for i in 0..24u64 {
        let n = [4usize, 7, 16][(i % 3) as usize];
        let seed = 5_000 + i;
        let mut cfg = base(n, Aleph, seed);
        cfg.scheduler = match i % 4 {
            0 | 1 => SchedulerKind::FairRandom,
            2 => SchedulerKind::Synchronous,
            _ => SchedulerKind::AdversarialDelay { slow: f_of(n), max_delay: Some(4 * n as u64) },
        };
        cfg.tx_rate = 0.3;
        if i % 2 == 1 {
            let b = if i % 4 == 1 { Behavior::EquivocatingProposer } else { Behavior::Forker { variants: 2 } };
            cfg = cfg.with_byzantine(&[b]);
        }
        let byz: Vec<usize> = (0..n).filter(|&j| cfg.is_byzantine(j)).collect();
        let mut s = Scenario::new(cfg).unwrap();
        s.run_until(60_000, |s| s.min_honest_heads() >= 6).unwrap();
        let honest: Vec<usize> = s.honest().to_vec();
        // Instances every honest node has output.
        let mut coords: HashSet<(usize, u32)> = HashSet::new();
        for &h in &honest {
            coords.extend(s.node(h).rec.delivered.keys().copied());
        }
        for &(p, r) in &coords {
            let got: Vec<(Digest, u32)> = honest.iter().filter_map(|&h| s.node(h).rec.delivered.get(&(p, r)).copied()).collect();
            let distinct: HashSet<Digest> = got.iter().map(|g| g.0).collect();
            if distinct.len() > 1 {
                failures.push(format!("seed {seed}: two outputs at ({p}, {r})"));
            }
            if got.len() < honest.len() {
                continue;
            }
            let first = got.iter().map(|g| g.1).min().unwrap();
            let last = got.iter().map(|g| g.1).max().unwrap();
            worst_gap = worst_gap.max(last - first);
            if last - first > 2 {
                failures.push(format!("seed {seed}: ({p}, {r}) output spread {} async-rounds", last - first));
            }
            if byz.contains(&p) {
                continue;
            }
            let Some(&proposed) = s.node(p).rec.created.get(&r) else { continue };
            instances += 1;
            worst_latency = worst_latency.max(last - proposed);
            if last > proposed + 3 {
                failures.push(format!("seed {seed}: ({p}, {r}) proposed at {proposed}, last output at {last}"));
            }
        }
    }
    outcome(
        &failures,
        format!("24 runs, {instances} honest instances, worst latency {worst_latency}, worst agreement gap {worst_gap} async-rounds"),
    )
}

// 6 ────────────────────────────────────────────────────────────────────────

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
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
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn threshold_crypto() -> Outcome {
    let mut failures = Vec::new();
    let b = GroupBackend::sim();
    let mut rng = ChaCha20Rng::seed_from_u64(6_007);
    let (n, f) = (7, 2);
    let (poly, keys) = generate_keys(&b, n, f, &mut rng).unwrap();
    let sets = subsets(n, f + 1);
    let mut checks = 0;
    for _ in 0..100 {
        let m = rng.next_u64().to_be_bytes();
        let shares: Vec<_> = (0..n).map(|i| create_share(&b, &m, keys.tk[i].as_ref().unwrap(), i)).collect();
        // Independent route: h(m)^{a(0)} from the dealer's polynomial.
        let oracle = b.exp(&b.hash_to_group(&m), &poly.evaluate_at(&b, 0));
        for set in &sets {
            let picked: Vec<_> = set.iter().map(|&i| shares[i].clone()).collect();
            checks += 1;
            if generate_signature(&b, &m, &picked, &keys.vk, f).ok().as_ref() != Some(&oracle) {
                failures.push(format!("subset {set:?} disagrees"));
            }
        }
    }

    // f known shares plus every possible value for one more share.
    let t = GroupBackend::tiny();
    let q = t.q().to_u64_digits()[0];
    let (a, tk) = generate_keys(&t, n, f, &mut ChaCha20Rng::seed_from_u64(6_008)).unwrap();
    let base_elem = t.hash_to_group(b"toss|0");
    let sigma = t.exp(&base_elem, &a.evaluate_at(&t, 0));
    let known: Vec<Element> = (0..f).map(|i| create_share_on(&t, &base_elem, tk.tk[i].as_ref().unwrap(), i).value).collect();
    let idx: Vec<u64> = (0..=f).map(eval_point).collect();
    let coeffs = lagrange_at_zero(&t, &idx).unwrap();
    let mut hits = 0u64;
    for y in 0..q {
        let guess = t.exp(&base_elem, &t.scalar(y));
        let vals: Vec<&Element> = known.iter().chain(std::iter::once(&guess)).collect();
        if combine_with_coefficients(&t, vals.into_iter(), &coeffs) == sigma {
            hits += 1;
        }
    }
    let freq = hits as f64 / q as f64;
    if freq > 2.0 / q as f64 {
        failures.push(format!("f-share reconstruction matched {hits} of {q} guesses"));
    }
    outcome(&failures, format!("{checks} subset reconstructions equal; f-share guess hit rate {hits}/{q}"))
}

// 7 ────────────────────────────────────────────────────────────────────────

fn slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs trustless setup and `tosses` tosses; returns per-honest-node setup
/// bytes, or an error string.
fn trustless_run(n: usize, seed: u64, byzantine: bool, tosses: u64, scheduler: SchedulerKind) -> Result<(f64, Scenario), String> {
    let mut cfg = base(n, Aleph, seed);
    cfg.beacon = BeaconKind::Trustless;
    cfg.scheduler = scheduler;
    if byzantine {
        cfg = cfg.with_byzantine(&[Behavior::GarbageDealer, Behavior::ShareWithholder]);
    }
    let mut s = Scenario::new(cfg).unwrap();
    let done = s.run_until(200_000, |s| s.honest_nodes().all(|node| node.rec.setup_done.is_some())).unwrap();
    if !done {
        return Err(format!("seed {seed} (N={n}): setup did not terminate"));
    }
    let honest = s.honest().to_vec();
    let bytes: u64 = honest.iter().map(|&h| s.world.traffic.total_bytes(h)).sum();
    let per_node = bytes as f64 / honest.len() as f64;
    for m in 0..tosses {
        let at = s.world.async_round();
        for &h in &honest {
            s.world.nodes[h].request_toss(m, at);
        }
        let ok = s
            .run_until(20_000, |s| s.honest_nodes().all(|node| node.rec.toss_outputs.contains_key(&m)))
            .unwrap();
        if !ok {
            return Err(format!("seed {seed} (N={n}): toss {m} never completed"));
        }
    }
    Ok((per_node, s))
}

fn trustless_beacon() -> Outcome {
    let mut failures = Vec::new();
    let mut terminated = 0;
    for i in 0..30u64 {
        let n = [4usize, 7][(i % 2) as usize];
        let seed = 7_000 + i;
        let s = match trustless_run(n, seed, true, 3, SchedulerKind::FairRandom) {
            Ok((_, s)) => s,
            Err(e) => {
                failures.push(e);
                continue;
            }
        };
        terminated += 1;
        let honest = s.honest().to_vec();
        for m in 0..3 {
            let outs: HashSet<Digest> = honest.iter().map(|&h| s.node(h).rec.toss_outputs[&m].0).collect();
            if outs.len() != 1 {
                failures.push(format!("seed {seed}: toss {m} outputs differ"));
            }
        }
        let b = GroupBackend::sim();
        for &h in &honest {
            let Some(keys) = s.node(h).toss_keys() else { continue };
            let correct = (0..n)
                .filter(|&j| s.node(j).toss_keys().and_then(|k| k.tk[j].as_ref()).is_some_and(|t| b.exp_g(t) == keys.vk[j]))
                .count();
            if correct < 2 * f_of(n) + 1 {
                failures.push(format!("seed {seed} node {h}: only {correct} correct combined keys"));
            }
        }
    }
    let mut points = Vec::new();
    let mut cost = Vec::new();
    for &n in &[4usize, 7, 16] {
        match trustless_run(n, 7_100 + n as u64, false, 0, SchedulerKind::FairRandom) {
            Ok((bytes, _)) => {
                points.push(((n as f64).ln(), bytes.ln()));
                cost.push(format!("N={n}: {:.0} B", bytes));
            }
            Err(e) => failures.push(e),
        }
    }
    let fit = if points.len() == 3 { slope(&points) } else { f64::NAN };
    if !(1.8..=2.6).contains(&fit) {
        failures.push(format!("setup communication slope {fit:.2} outside [1.8, 2.6]"));
    }
    outcome(&failures, format!("{terminated}/30 setups terminated; per-node setup traffic {}; log-log slope {fit:.2}", cost.join(", ")))
}

// 8 ────────────────────────────────────────────────────────────────────────

fn toss_latency() -> Outcome {
    let mut failures = Vec::new();
    let mut tosses = 0;
    let mut worst = 0;
    for i in 0..10u64 {
        let n = [4usize, 7][(i % 2) as usize];
        let seed = 8_000 + i;
        let s = match trustless_run(n, seed, i % 3 == 2, 0, SchedulerKind::Synchronous) {
            Ok((_, s)) => s,
            Err(e) => {
                failures.push(e);
                continue;
            }
        };
        let mut s = s;
        let honest = s.honest().to_vec();
        for m in 0..5u64 {
            // Requests arrive together at a batch boundary.
            while s.world.step_count() % n as u64 != 0 {
                s.step().unwrap();
            }
            let at = s.world.async_round();
            for &h in &honest {
                s.world.nodes[h].request_toss(m, at);
            }
            s.run_until(20 * n as u64, |s| s.honest_nodes().all(|node| node.rec.toss_outputs.contains_key(&m))).unwrap();
            tosses += 1;
            for &h in &honest {
                match s.node(h).rec.toss_outputs.get(&m) {
                    Some(&(_, out)) => {
                        worst = worst.max(out - at);
                        if out > at + 2 {
                            failures.push(format!("seed {seed} node {h}: toss {m} took {} async-rounds", out - at));
                        }
                    }
                    None => failures.push(format!("seed {seed} node {h}: toss {m} missing")),
                }
            }
        }
    }
    outcome(&failures, format!("{tosses} synchronous tosses, worst {worst} async-rounds"))
}

// 9 ────────────────────────────────────────────────────────────────────────

fn optimistic_validation() -> Outcome {
    let mut failures = Vec::new();
    let mut rounds_ok = 0;
    let mut rounds_total = 0;
    for (n, crashed, seed) in [(4usize, 0usize, 9_004u64), (7, 2, 9_007)] {
        let mut cfg = base(n, Quick, seed);
        cfg.scheduler = SchedulerKind::Synchronous;
        cfg.tx_rate = 0.2;
        if crashed > 0 {
            cfg.byzantine = (n - crashed..n)
                .map(|node| crate::netsim::ByzantineSpec { node, behaviors: vec![Behavior::Crash] })
                .collect();
        }
        let mut s = Scenario::new(cfg.clone()).unwrap();
        let want = 60u32;
        s.run_until(200_000, |s| s.min_honest_height() >= (want + 4) as i64).unwrap();
        let b = GroupBackend::by_name(&cfg.backend).unwrap();
        let keys = s.dealer_keys.clone().unwrap();
        let node = s.node(s.honest()[0]);
        let dag = &node.dag;
        let heads: HashMap<u32, Digest> = node.rec.heads.iter().map(|h| (h.round, h.head)).collect();
        for r in 0..want {
            let default = crate::consensus::default_index(r, n);
            if cfg.is_byzantine(default) {
                continue;
            }
            rounds_total += 1;
            let mut round_ok = true;
            for &u in dag.units_at_round(r + 3) {
                let mut cone = dag.lower_cone(u, 0);
                cone.sort_by_key(|&x| (dag.round(x), dag.hash(x)));
                let mut sub = ChDag::new(n, DagMode::Quick);
                for x in cone {
                    sub.insert(dag.unit(x).clone()).unwrap();
                }
                let mut coin = DealerCoin::new(b.clone(), &keys, 0);
                let mut orderer = Orderer::new(Voting::new(Quick), r);
                let got = orderer.choose_head(r, &sub, &mut coin).ok().flatten().map(|h| sub.hash(h));
                if got.is_none() || got != heads.get(&r).copied() {
                    round_ok = false;
                    failures.push(format!("seed {seed}: round {r} head not fixed by unit {}", &dag.hash(u).to_hex()[..8]));
                }
            }
            if round_ok {
                rounds_ok += 1;
            }
        }
    }
    if rounds_total < 100 {
        failures.push(format!("only {rounds_total} rounds checked"));
    }
    outcome(&failures, format!("{rounds_ok}/{rounds_total} rounds decided by every single round-(r+3) cone"))
}

// 10 ───────────────────────────────────────────────────────────────────────

fn fork_bomb_criterion() -> Outcome {
    let mut failures = Vec::new();
    let k = 6;
    let weak = fork_bomb(&AttackConfig::new(k, Quick, true, 10_006)).unwrap();
    let need = (1usize << (k + 1)) - 2;
    if !weak.launched || weak.min_bomb_units() < need {
        failures.push(format!("weakened: honest nodes store only {} of the {need} bomb units", weak.min_bomb_units()));
    }
    let hard = fork_bomb(&AttackConfig::new(k, Quick, false, 10_006)).unwrap();
    if !hard.launched {
        failures.push("hardened: bomb never launched".into());
    }
    if hard.max_variants() > hard.n {
        failures.push(format!("hardened: {} variants at one coordinate", hard.max_variants()));
    }
    if hard.max_storage_ratio > 1.0 || hard.growth_slope > hard.n as f64 {
        failures.push(format!(
            "hardened: storage not linear (ratio {:.2}, slope {:.1})",
            hard.max_storage_ratio, hard.growth_slope
        ));
    }
    if !weak.agreement || !hard.agreement {
        failures.push("honest logs diverge".into());
    }
    outcome(
        &failures,
        format!(
            "K={k}, N={}: weakened stores {} bomb units (>= {need}); hardened stores {}, max {} variants per coordinate, \
             growth slope {:.1} units/round, peak storage {:.2}·N·rounds",
            weak.n,
            weak.min_bomb_units(),
            hard.min_bomb_units(),
            hard.max_variants(),
            hard.growth_slope,
            hard.max_storage_ratio
        ),
    )
}

// 11 ───────────────────────────────────────────────────────────────────────

fn fingerprint(s: &Scenario) -> Digest {
    let mut h = Hasher::new("replay");
    h.u64(s.world.step_count());
    for node in &s.world.nodes {
        for d in node.ordered_hashes() {
            h.part(d.as_bytes());
        }
        for id in node.log.entries() {
            h.part(&id.0);
        }
        for tally in [&s.world.traffic.bytes[node.me], &s.world.traffic.messages[node.me]] {
            for (k, v) in tally {
                h.part(k.as_bytes()).u64(*v);
            }
        }
    }
    h.finish()
}

fn determinism() -> Outcome {
    let mut failures = Vec::new();
    let mut configs = Vec::new();
    let mut c = base(7, Aleph, 11_001);
    c.tx_rate = 0.4;
    c.scheduler = SchedulerKind::AdversarialDelay { slow: 2, max_delay: None };
    configs.push(c.with_byzantine(&[Behavior::EquivocatingProposer]));
    let mut c = base(7, Quick, 11_002);
    c.tx_rate = 0.4;
    configs.push(c.with_byzantine(&[Behavior::Forker { variants: 2 }]));
    let mut c = base(4, Aleph, 11_003);
    c.beacon = BeaconKind::Trustless;
    configs.push(c.with_byzantine(&[Behavior::GarbageDealer, Behavior::ShareWithholder]));
    let mut c = base(4, Quick, 11_004);
    c.scheduler = SchedulerKind::Synchronous;
    c.tx_rate = 1.0;
    configs.push(c);
    for cfg in &configs {
        let run = || {
            let mut s = Scenario::new(cfg.clone()).unwrap();
            s.run_until(3_000, |_| false).unwrap();
            fingerprint(&s)
        };
        let (a, b) = (run(), run());
        if a != b {
            failures.push(format!("seed {} ({:?}) replays differently", cfg.seed, cfg.mode));
        }
    }
    outcome(&failures, format!("{} configurations replayed bit-identically", configs.len()))
}

pub struct Criterion {
    pub number: usize,
    /// Short name used on the command line.
    pub key: &'static str,
    pub title: &'static str,
    pub run: fn() -> Outcome,
}

pub fn criteria() -> Vec<Criterion> {
    let table: [(&'static str, &'static str, fn() -> Outcome); 11] = [
        ("safety", "safety", safety),
        ("censorship", "censorship resilience", censorship),
        ("choose-head", "choose-head latency tail", choose_head_latency),
        ("fast-decisions", "fast positive/negative decisions", fast_decisions),
        ("rbc", "ch-RBC", rbc),
        ("threshold", "threshold crypto", threshold_crypto),
        ("beacon", "trustless beacon", trustless_beacon),
        ("toss", "toss latency", toss_latency),
        ("quick-validation", "optimistic 3-round validation", optimistic_validation),
        ("fork-bomb", "fork bomb", fork_bomb_criterion),
        ("determinism", "determinism", determinism),
    ];
    table.into_iter().enumerate().map(|(i, (key, title, run))| Criterion { number: i + 1, key, title, run }).collect()
}

/// Criteria selected by number or key; `all` (or nothing) selects every one.
pub fn select(names: &[String]) -> Result<Vec<Criterion>, String> {
    let all = criteria();
    if names.is_empty() || names.iter().any(|n| n == "all") {
        return Ok(all);
    }
    let mut picked = Vec::new();
    for name in names {
        let hit = all.iter().position(|c| c.key == name || name.parse() == Ok(c.number));
        match hit {
            Some(i) if !picked.contains(&i) => picked.push(i),
            Some(_) => {}
            None => return Err(format!("unknown suite {name:?}")),
        }
    }
    picked.sort_unstable();
    Ok(all.into_iter().enumerate().filter(|(i, _)| picked.contains(i)).map(|(_, c)| c).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub number: usize,
    pub key: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Report {
    pub fn line(&self, title: &str) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        format!("criterion {:>2} [{verdict}] {title}: {} ({:.1}s)", self.number, self.detail, self.seconds)
    }
}

pub fn run(c: &Criterion) -> Report {
    let t = Instant::now();
    let o = (c.run)();
    Report { number: c.number, key: c.key, pass: o.pass, detail: o.detail, seconds: t.elapsed().as_secs_f64() }
}
