use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use aleph_lab::abcast::attack::{fork_bomb, AttackConfig, AttackReport};
use aleph_lab::abcast::metrics;
use aleph_lab::abcast::{Scenario, Summary};
use aleph_lab::acceptance;
use aleph_lab::consensus::ConsensusMode;
use aleph_lab::netsim::BeaconKind;
use serde::Serialize;

use crate::settings::{self, Settings};
use crate::ScenarioArgs;

type CmdResult = Result<bool, String>;

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value).map_err(|e| e.to_string())
}

fn quantile(sorted: &[u32], q: f64) -> Option<u32> {
    (!sorted.is_empty()).then(|| sorted[((sorted.len() - 1) as f64 * q).round() as usize])
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.0}"))
}

#[derive(Serialize)]
struct RunRecord {
    seed: u64,
    ok: bool,
    error: Option<String>,
    summary: Summary,
}

#[derive(Serialize)]
struct RunAggregate {
    runs: usize,
    failed: usize,
    latency_median: Option<u32>,
    latency_p95: Option<u32>,
    bytes_per_node_per_round: f64,
    records: Vec<RunRecord>,
}

pub fn run(args: &ScenarioArgs) -> CmdResult {
    let settings = settings::load(args)?;
    let Settings { sim, repeat, out_dir } = settings;
    println!(
        "{:>8} {:>7} {:>7} {:>6} {:>8} {:>8} {:>8} {:>12} {:>6}",
        "seed", "steps", "rounds", "heads", "outputs", "lat p50", "lat p95", "B/node/rnd", "ok"
    );
    let mut records = Vec::new();
    let mut pooled = Vec::new();
    for k in 0..repeat {
        let mut cfg = sim.clone();
        cfg.seed = sim.seed + k;
        let mut s = Scenario::new(cfg.clone()).map_err(|e| e.to_string())?;
        let error = s.run().err().map(|e| e.to_string());
        let summary = s.summary();
        let ok = error.is_none() && summary.agreement && summary.faults.is_empty();
        println!(
            "{:>8} {:>7} {:>7} {:>6} {:>8} {:>8} {:>8} {:>12.0} {:>6}",
            cfg.seed,
            summary.steps,
            summary.async_rounds,
            summary.min_heads,
            summary.min_outputs,
            fmt_opt(summary.latency_median),
            fmt_opt(summary.latency_p95),
            summary.bytes_per_node_per_round,
            if ok { "yes" } else { "NO" }
        );
        if let Some(e) = &error {
            eprintln!("seed {}: {e}", cfg.seed);
        }
        for fault in &summary.faults {
            eprintln!("seed {}: {fault}", cfg.seed);
        }
        pooled.extend(s.latencies());
        if let Some(dir) = &out_dir {
            let path = dir.join(format!("metrics-{}.jsonl", cfg.seed));
            fs::create_dir_all(dir).map_err(|e| e.to_string())?;
            let f = File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            metrics::write_jsonl(&metrics::collect(&s), BufWriter::new(f)).map_err(|e| e.to_string())?;
            write_json(dir, &format!("trace-{}.json", cfg.seed), &metrics::trace(&s))?;
        }
        records.push(RunRecord { seed: cfg.seed, ok, error, summary });
    }
    pooled.sort_unstable();
    let failed = records.iter().filter(|r| !r.ok).count();
    let agg = RunAggregate {
        runs: records.len(),
        failed,
        latency_median: quantile(&pooled, 0.5),
        latency_p95: quantile(&pooled, 0.95),
        bytes_per_node_per_round: records.iter().map(|r| r.summary.bytes_per_node_per_round).sum::<f64>()
            / records.len() as f64,
        records,
    };
    if repeat > 1 {
        println!(
            "{} runs, {} failed; pooled latency p50 {} p95 {} async-rounds",
            agg.runs,
            failed,
            agg.latency_median.map_or("-".into(), |x| x.to_string()),
            agg.latency_p95.map_or("-".into(), |x| x.to_string())
        );
    }
    if let Some(dir) = &out_dir {
        write_json(dir, "summary.json", &agg)?;
    }
    Ok(failed == 0)
}

#[derive(Serialize)]
struct BeaconRecord {
    seed: u64,
    setup_round: Option<u32>,
    setup_bytes_per_node: f64,
    tosses: Vec<TossRecord>,
    equal: bool,
}

#[derive(Serialize)]
struct TossRecord {
    nonce: u64,
    value: Option<String>,
    latency: Option<u32>,
    equal: bool,
}

pub fn beacon(args: &ScenarioArgs, tosses: u64) -> CmdResult {
    let mut args = args.clone();
    args.beacon = Some("trustless".into());
    if args.mode.as_deref() == Some("quick") {
        return Err("the trustless beacon runs in aleph mode".into());
    }
    let Settings { sim, repeat, out_dir } = settings::load(&args)?;
    debug_assert_eq!(sim.beacon, BeaconKind::Trustless);
    let mut all_ok = true;
    let mut records = Vec::new();
    for k in 0..repeat {
        let mut cfg = sim.clone();
        cfg.seed = sim.seed + k;
        let mut s = Scenario::new(cfg.clone()).map_err(|e| e.to_string())?;
        let setup = s
            .run_until(cfg.budget, |s| s.honest_nodes().all(|n| n.rec.setup_done.is_some()))
            .map_err(|e| e.to_string())?;
        let honest = s.honest().to_vec();
        let bytes: u64 = honest.iter().map(|&h| s.world.traffic.total_bytes(h)).sum();
        let setup_round = honest.iter().filter_map(|&h| s.node(h).rec.setup_done).max();
        println!(
            "seed {}: setup {} at async round {}, {:.0} bytes per honest node",
            cfg.seed,
            if setup { "done" } else { "INCOMPLETE" },
            setup_round.map_or("-".into(), |r| r.to_string()),
            bytes as f64 / honest.len() as f64
        );
        let mut rec = BeaconRecord {
            seed: cfg.seed,
            setup_round,
            setup_bytes_per_node: bytes as f64 / honest.len() as f64,
            tosses: Vec::new(),
            equal: setup,
        };
        for m in 0..tosses.min(if setup { u64::MAX } else { 0 }) {
            let at = s.world.async_round();
            for &h in &honest {
                s.world.nodes[h].request_toss(m, at);
            }
            s.run_until(cfg.budget, |s| s.honest_nodes().all(|n| n.rec.toss_outputs.contains_key(&m)))
                .map_err(|e| e.to_string())?;
            let outs: Vec<_> = honest.iter().map(|&h| s.node(h).rec.toss_outputs.get(&m).copied()).collect();
            let first = outs[0];
            let equal = first.is_some() && outs.iter().all(|o| o.map(|x| x.0) == first.map(|x| x.0));
            let latency = outs.iter().map(|o| o.map(|x| x.1 - at)).collect::<Option<Vec<_>>>().and_then(|v| v.into_iter().max());
            let value = first.map(|x| x.0.to_hex());
            println!(
                "  toss {m}: {} {} (latency {} async-rounds)",
                value.as_deref().unwrap_or("-"),
                if equal { "equal at all honest nodes" } else { "MISMATCH" },
                latency.map_or("-".into(), |l| l.to_string())
            );
            rec.equal &= equal;
            rec.tosses.push(TossRecord { nonce: m, value, latency, equal });
        }
        all_ok &= rec.equal;
        records.push(rec);
    }
    if let Some(dir) = &out_dir {
        write_json(dir, "beacon.json", &records)?;
    }
    Ok(all_ok)
}

fn print_report(label: &str, r: &AttackReport) {
    println!(
        "{label}: N={} K={} seed={} launched={} bomb units built={} forked outputs={} agreement={}",
        r.n, r.depth, r.seed, r.launched, r.bomb_total, r.forked_outputs, r.agreement
    );
    println!("  {:>5} {:>7} {:>7} {:>11} {:>9}", "node", "height", "stored", "bomb units", "variants");
    for s in &r.nodes {
        println!("  {:>5} {:>7} {:>7} {:>11} {:>9}", s.node, s.height, s.stored, s.bomb_units, s.max_variants);
    }
    println!("  growth slope {:.1} units/round, peak storage {:.2}·N·(height+1)", r.growth_slope, r.max_storage_ratio);
}

pub fn attack(kind: &str, k: usize, mode: &str, seed: u64, budget: Option<u64>, out_dir: Option<&Path>) -> CmdResult {
    if kind != "fork-bomb" {
        return Err(format!("unknown attack {kind:?}"));
    }
    if k == 0 || k > 8 {
        return Err("K must lie in 1..=8".into());
    }
    let runs: Vec<(&str, ConsensusMode, bool)> = match mode {
        "quick" => vec![("weakened", ConsensusMode::Quick, true), ("hardened", ConsensusMode::Quick, false)],
        "aleph" => vec![("aleph", ConsensusMode::Aleph, false)],
        "all" => vec![
            ("weakened", ConsensusMode::Quick, true),
            ("hardened", ConsensusMode::Quick, false),
            ("aleph", ConsensusMode::Aleph, false),
        ],
        other => return Err(format!("unknown mode {other:?}")),
    };
    let mut ok = true;
    let mut reports = Vec::new();
    for (label, m, weakened) in runs {
        let mut cfg = AttackConfig::new(k, m, weakened, seed);
        if let Some(b) = budget {
            cfg.budget = b;
        }
        let r = fork_bomb(&cfg).map_err(|e| e.to_string())?;
        print_report(label, &r);
        let (pass, claim) = match label {
            "weakened" => {
                let need = (1usize << (k + 1)) - 2;
                (r.min_bomb_units() >= need, format!("every honest node stores >= {need} bomb units"))
            }
            "hardened" => (
                r.max_variants() <= r.n && r.max_storage_ratio <= 1.0,
                format!("<= {} variants per coordinate and storage linear in rounds", r.n),
            ),
            _ => (r.forked_outputs == 0, "no forked unit is ever output".into()),
        };
        println!("  check: {claim}: {}", if pass && r.agreement { "PASS" } else { "FAIL" });
        ok &= pass && r.agreement;
        reports.push(r);
    }
    if let Some(dir) = out_dir {
        write_json(dir, "attack.json", &reports)?;
    }
    Ok(ok)
}

pub fn verify(names: &[String], out_dir: Option<&Path>) -> CmdResult {
    let selected = acceptance::select(names)?;
    let mut reports = Vec::new();
    for c in &selected {
        let r = acceptance::run(c);
        println!("{}", r.line(c.title));
        reports.push(r);
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} of {} criteria passed", reports.len() - failed, reports.len());
    if let Some(dir) = out_dir {
        write_json(dir, "verify.json", &reports)?;
    }
    Ok(failed == 0)
}
