//! Scenario files and flag overrides.

use std::path::PathBuf;

use aleph_lab::consensus::ConsensusMode;
use aleph_lab::netsim::{BeaconKind, Behavior, ByzantineSpec, SchedulerKind, SimConfig};
use serde::{Deserialize, Serialize};

use crate::ScenarioArgs;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    #[serde(flatten)]
    pub sim: SimConfig,
    pub repeat: u64,
    pub out_dir: Option<PathBuf>,
}

pub fn load(args: &ScenarioArgs) -> Result<Settings, String> {
    let mut s = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str::<Settings>(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => Settings::default(),
    };
    if let Some(n) = args.nodes {
        s.sim.n = n;
        s.sim.f = None;
    }
    if let Some(m) = &args.mode {
        s.sim.mode = parse_mode(m)?;
    }
    if let Some(b) = &args.beacon {
        s.sim.beacon = match b.as_str() {
            "dealer" => BeaconKind::Dealer,
            "trustless" => BeaconKind::Trustless,
            other => return Err(format!("unknown beacon {other:?}")),
        };
    }
    if let Some(seed) = args.seed {
        s.sim.seed = seed;
    }
    if let Some(budget) = args.budget {
        s.sim.budget = budget;
    }
    if let Some(rate) = args.tx_rate {
        s.sim.tx_rate = rate;
    }
    if let Some(r) = args.repeat {
        s.repeat = r;
    }
    if let Some(d) = &args.out_dir {
        s.out_dir = Some(d.clone());
    }
    // Depend on n and f, so applied last.
    if let Some(sched) = &args.scheduler {
        s.sim.scheduler = parse_scheduler(sched, s.sim.f())?;
    }
    if let Some(spec) = &args.byzantine {
        s.sim.byzantine = parse_byzantine(spec, s.sim.n, s.sim.f())?;
    }
    s.repeat = s.repeat.max(1);
    s.sim.validate().map_err(|e| e.to_string())?;
    Ok(s)
}

pub fn parse_mode(m: &str) -> Result<ConsensusMode, String> {
    match m {
        "aleph" => Ok(ConsensusMode::Aleph),
        "quick" => Ok(ConsensusMode::Quick),
        other => Err(format!("unknown mode {other:?}")),
    }
}

pub fn parse_scheduler(s: &str, f: usize) -> Result<SchedulerKind, String> {
    let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
    match name {
        "fair" => Ok(SchedulerKind::FairRandom),
        "synchronous" | "sync" => Ok(SchedulerKind::Synchronous),
        "adversarial" => {
            let slow = match arg {
                Some(x) => x.parse().map_err(|_| format!("bad slow count {x:?}"))?,
                None => f,
            };
            Ok(SchedulerKind::AdversarialDelay { slow, max_delay: None })
        }
        other => Err(format!("unknown scheduler {other:?}")),
    }
}

fn parse_behavior(b: &str) -> Result<Behavior, String> {
    let (name, arg) = b.split_once(':').map_or((b, None), |(a, b)| (a, Some(b)));
    let num = |default: usize| -> Result<usize, String> {
        arg.map_or(Ok(default), |x| x.parse().map_err(|_| format!("bad number in {b:?}")))
    };
    Ok(match name {
        "forker" => Behavior::Forker { variants: num(2)? },
        "equivocator" => Behavior::EquivocatingProposer,
        "withholder" => Behavior::ShareWithholder,
        "garbage" => Behavior::GarbageDealer,
        "crash" => Behavior::Crash,
        other => return Err(format!("unknown behavior {other:?}")),
    })
}

/// `behavior[+behavior…][@count]`, applied to the `count` (default f)
/// highest node ids. `none` clears the set.
pub fn parse_byzantine(spec: &str, n: usize, f: usize) -> Result<Vec<ByzantineSpec>, String> {
    if spec == "none" {
        return Ok(Vec::new());
    }
    let (list, count) = match spec.split_once('@') {
        Some((l, c)) => (l, c.parse::<usize>().map_err(|_| format!("bad count in {spec:?}"))?),
        None => (spec, f),
    };
    if count > n {
        return Err(format!("{count} byzantine nodes out of {n}"));
    }
    let behaviors = list.split('+').map(parse_behavior).collect::<Result<Vec<_>, _>>()?;
    Ok((n - count..n).map(|node| ByzantineSpec { node, behaviors: behaviors.clone() }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byzantine_specs() {
        let b = parse_byzantine("garbage+withholder", 7, 2).unwrap();
        assert_eq!(b.iter().map(|s| s.node).collect::<Vec<_>>(), vec![5, 6]);
        assert_eq!(b[0].behaviors, vec![Behavior::GarbageDealer, Behavior::ShareWithholder]);
        assert_eq!(parse_byzantine("crash@1", 4, 1).unwrap()[0].node, 3);
        assert_eq!(parse_byzantine("forker:3", 4, 1).unwrap()[0].behaviors, vec![Behavior::Forker { variants: 3 }]);
        assert!(parse_byzantine("sneaky", 4, 1).is_err());
        assert!(parse_byzantine("none", 4, 1).unwrap().is_empty());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(&path, r#"{"n": 7, "mode": "quick", "seed": 3, "repeat": 4}"#).unwrap();
        let args = ScenarioArgs { config: Some(path), seed: Some(9), scheduler: Some("adversarial".into()), ..Default::default() };
        let s = load(&args).unwrap();
        assert_eq!((s.sim.n, s.sim.mode, s.sim.seed, s.repeat), (7, ConsensusMode::Quick, 9, 4));
        assert_eq!(s.sim.scheduler, SchedulerKind::AdversarialDelay { slow: 2, max_delay: None });
        let bad = ScenarioArgs { nodes: Some(5), ..Default::default() };
        assert!(load(&bad).is_err());
    }
}
