use aleph_lab::abcast::Scenario;
use aleph_lab::beacon::dealer::{deal, DealerCoin};
use aleph_lab::chdag::{ChDag, DagMode};
use aleph_lab::consensus::{order_units, ConsensusMode};
use aleph_lab::crypto::{create_share, generate_signature, GroupBackend};
use aleph_lab::netsim::{BeaconKind, SimConfig};
use aleph_lab::rbc::Code;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn erasure(c: &mut Criterion) {
    let mut g = c.benchmark_group("erasure");
    let data: Vec<u8> = (0..16 * 1024).map(|i| (i * 31 % 251) as u8).collect();
    for n in [4usize, 16, 64] {
        let code = Code::new((n - 1) / 3 + 1, n);
        let shards = code.encode(&data);
        g.bench_with_input(BenchmarkId::new("encode", n), &n, |b, _| b.iter(|| code.encode(&data)));
        let tail: Vec<(usize, &[u8])> = shards.iter().enumerate().skip(n - code.k).map(|(i, s)| (i, s.as_slice())).collect();
        g.bench_with_input(BenchmarkId::new("decode_parity", n), &n, |b, _| b.iter(|| code.decode(&tail).unwrap()));
    }
    g.finish();
}

fn threshold(c: &mut Criterion) {
    let b = GroupBackend::sim();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (n, f) = (16, 5);
    let keys = deal(&b, n, f, &mut rng);
    let m = b"nonce 7";
    let shares: Vec<_> = (0..=f).map(|i| create_share(&b, m, keys.tk[i].as_ref().unwrap(), i)).collect();
    c.bench_function("threshold/share", |bn| bn.iter(|| create_share(&b, m, keys.tk[0].as_ref().unwrap(), 0)));
    c.bench_function("threshold/combine_f+1_of_16", |bn| bn.iter(|| generate_signature(&b, m, &shares, &keys.vk, f).unwrap()));
}

fn ordering(c: &mut Criterion) {
    let mut cfg = SimConfig { n: 7, seed: 4, tx_rate: 0.2, ..SimConfig::default() };
    cfg.mode = ConsensusMode::Aleph;
    let mut s = Scenario::new(cfg).unwrap();
    s.run_until(200_000, |s| s.min_honest_heads() >= 30).unwrap();
    let src = &s.node(0).dag;
    let mut dag = ChDag::new(7, DagMode::Rbc);
    for u in src.units() {
        dag.insert(u.clone()).unwrap();
    }
    let keys = s.dealer_keys.clone().unwrap();
    let backend = GroupBackend::sim();
    c.bench_function("consensus/order_30_rounds_n7", |b| {
        b.iter(|| {
            let mut coin = DealerCoin::new(backend.clone(), &keys, 0);
            order_units(&dag, ConsensusMode::Aleph, 0, &mut coin)
        })
    });
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    for (name, mode) in [("aleph", ConsensusMode::Aleph), ("quick", ConsensusMode::Quick)] {
        g.bench_function(BenchmarkId::new("n4_10_heads", name), |b| {
            b.iter(|| {
                let mut s = Scenario::new(SimConfig { n: 4, mode, seed: 3, tx_rate: 0.3, ..SimConfig::default() }).unwrap();
                s.run_until(50_000, |s| s.min_honest_heads() >= 10).unwrap()
            })
        });
    }
    g.bench_function("trustless_setup_n4", |b| {
        b.iter(|| {
            let mut s = Scenario::new(SimConfig { n: 4, seed: 3, beacon: BeaconKind::Trustless, ..SimConfig::default() }).unwrap();
            s.run_until(50_000, |s| s.honest_nodes().all(|n| n.rec.setup_done.is_some())).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, erasure, threshold, ordering, simulation);
criterion_main!(benches);
