//! The fork-bomb attack against one dissemination mode.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::scenario::Scenario;
use crate::consensus::ConsensusMode;
use crate::netsim::{Behavior, ByzantineSpec, ConfigError, SchedulerKind, SimConfig, SimError};
use crate::{NodeId, Round};

#[derive(Clone, Debug)]
pub struct AttackConfig {
    pub depth: usize,
    pub mode: ConsensusMode,
    /// Quick mode only: accept every locally valid unit, no alerts.
    pub weakened: bool,
    pub seed: u64,
    pub budget: u64,
    /// Rounds the honest nodes run past the bomb's last round.
    pub extra_rounds: Round,
}

impl AttackConfig {
    pub fn new(depth: usize, mode: ConsensusMode, weakened: bool, seed: u64) -> Self {
        AttackConfig { depth, mode, weakened, seed, budget: 400_000, extra_rounds: 8 }
    }

    pub const START: Round = 2;

    pub fn sim_config(&self) -> SimConfig {
        let n = 6 * self.depth + 1;
        let f = 2 * self.depth;
        let behaviors = match self.mode {
            ConsensusMode::Quick => vec![Behavior::ForkBomb { depth: self.depth, start: Self::START }],
            ConsensusMode::Aleph => vec![Behavior::Forker { variants: 1 << self.depth }],
        };
        SimConfig {
            n,
            mode: self.mode,
            scheduler: SchedulerKind::FairRandom,
            byzantine: (0..f).map(|node| ByzantineSpec { node, behaviors: behaviors.clone() }).collect(),
            weakened: self.weakened,
            seed: self.seed,
            budget: self.budget,
            ..SimConfig::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeStorage {
    pub node: NodeId,
    pub height: i64,
    /// Units in the dag plus staged units.
    pub stored: usize,
    pub bomb_units: usize,
    pub max_variants: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackReport {
    pub depth: usize,
    pub n: usize,
    pub mode: ConsensusMode,
    pub weakened: bool,
    pub seed: u64,
    pub launched: bool,
    pub bomb_total: usize,
    pub nodes: Vec<NodeStorage>,
    /// Least-squares slope of stored units against height (first honest node).
    pub growth_slope: f64,
    /// Largest stored/(N·(height+1)) seen over any honest node's history.
    pub max_storage_ratio: f64,
    /// Coordinates with two different units in honest orders.
    pub forked_outputs: usize,
    pub agreement: bool,
}

impl AttackReport {
    pub fn min_bomb_units(&self) -> usize {
        self.nodes.iter().map(|n| n.bomb_units).min().unwrap_or(0)
    }

    pub fn max_variants(&self) -> usize {
        self.nodes.iter().map(|n| n.max_variants).max().unwrap_or(0)
    }
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AttackError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub fn fork_bomb(cfg: &AttackConfig) -> Result<AttackReport, AttackError> {
    let sim = cfg.sim_config();
    let n = sim.n;
    let mut s = Scenario::new(sim)?;
    let target = (AttackConfig::START + cfg.depth as Round + cfg.extra_rounds) as i64;
    let quick = cfg.mode == ConsensusMode::Quick;
    s.run_until(cfg.budget, |s| {
        let launched = !quick || (0..n).any(|i| s.node(i).rec.bomb_launched.is_some());
        launched && s.min_honest_height() >= target
    })?;

    let bomb: HashSet<_> = (0..n).flat_map(|i| s.node(i).rec.bomb_units.iter().copied()).collect();
    let launched = !quick || (0..n).any(|i| s.node(i).rec.bomb_launched.is_some());
    let mut nodes = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for node in s.honest_nodes() {
        let dag = &node.dag;
        let mut per: HashMap<(NodeId, Round), usize> = HashMap::new();
        for i in 0..dag.len() {
            *per.entry((dag.creator(i), dag.round(i))).or_insert(0) += 1;
        }
        for &(h, stored) in &node.rec.sizes {
            max_ratio = max_ratio.max(stored as f64 / (n as f64 * (h as f64 + 1.0)));
        }
        nodes.push(NodeStorage {
            node: node.me,
            height: dag.height_i64(),
            stored: dag.len() + node.staged(),
            bomb_units: dag.units().iter().filter(|u| bomb.contains(&u.hash())).count(),
            max_variants: per.values().copied().max().unwrap_or(0),
        });
    }
    let growth_slope = s
        .honest_nodes()
        .next()
        .map(|node| slope(&node.rec.sizes.iter().map(|&(h, c)| (h as f64, c as f64)).collect::<Vec<_>>()))
        .unwrap_or(0.0);
    let mut outputs: HashMap<(NodeId, Round), HashSet<_>> = HashMap::new();
    for node in s.honest_nodes() {
        for &u in node.orderer().order() {
            outputs.entry((node.dag.creator(u), node.dag.round(u))).or_default().insert(node.dag.hash(u));
        }
    }
    Ok(AttackReport {
        depth: cfg.depth,
        n,
        mode: cfg.mode,
        weakened: cfg.weakened,
        seed: cfg.seed,
        launched,
        bomb_total: bomb.len(),
        nodes,
        growth_slope,
        max_storage_ratio: max_ratio,
        forked_outputs: outputs.values().filter(|v| v.len() > 1).count(),
        agreement: s.agreement(),
    })
}
