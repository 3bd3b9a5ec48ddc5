//! Builds a simulated world from a [`SimConfig`] and drives it.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::node::{BeaconSetup, BombKit, Node, NodeSetup};
use super::txbuf::TxId;
use crate::beacon::dealer::{deal, DealerRules};
use crate::beacon::multicoin::{SetupCache, TrustlessConfig, TrustlessRules};
use crate::chdag::Validator;
use crate::crypto::{DedicatedKeyPairs, GroupBackend, SigningKey, ThresholdKeySet};
use crate::netsim::forkbomb::ForkBombPlan;
use crate::netsim::{rng_for, BeaconKind, ConfigError, SimConfig, SimError, SimWorld};
use crate::NodeId;

#[derive(Clone, Copy, Debug, Default)]
pub struct ScenarioOptions {
    /// Cross-check every decision against all deciding units.
    pub audit: bool,
    /// Record round-r unit sets when the height reaches r+4.
    pub snapshots: bool,
    pub horizon: Option<u64>,
    pub probe_heads: bool,
}

pub struct Scenario {
    pub cfg: SimConfig,
    pub world: SimWorld<Node>,
    pub dealer_keys: Option<ThresholdKeySet>,
    honest: Vec<NodeId>,
    live_honest: Vec<NodeId>,
    rng: ChaCha20Rng,
    tx_acc: f64,
    tx_count: u64,
    /// First input of each injected transaction: (async round, step).
    pub inputs: HashMap<TxId, (u32, u64)>,
}

/// Aggregate view of a run over the honest nodes.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub steps: u64,
    pub async_rounds: u32,
    pub min_heads: usize,
    pub max_heads: usize,
    pub min_outputs: usize,
    pub injected: usize,
    pub latency_median: Option<f64>,
    pub latency_p95: Option<f64>,
    pub bytes_per_node_per_round: f64,
    pub agreement: bool,
    pub faults: Vec<String>,
}

fn quantile(sorted: &[u32], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    Some(sorted[idx] as f64)
}

impl Scenario {
    pub fn new(cfg: SimConfig) -> Result<Self, ConfigError> {
        Self::with_options(cfg, ScenarioOptions::default())
    }

    pub fn with_options(cfg: SimConfig, opts: ScenarioOptions) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let n = cfg.n;
        let f = cfg.f();
        let backend: Arc<GroupBackend> = GroupBackend::by_name(&cfg.backend).ok_or(ConfigError::Backend(cfg.backend.clone()))?;
        let keys: Vec<SigningKey> =
            (0..n).map(|i| SigningKey::generate(&backend, &mut rng_for(cfg.seed, "keys", i as u64))).collect();
        let pks = Arc::new(keys.iter().map(|k| k.public().clone()).collect::<Vec<_>>());

        let mut dealer_keys = None;
        let mut trustless = None;
        let base_validator = Validator::new(backend.clone(), pks.clone());
        let validator = match cfg.beacon {
            BeaconKind::Dealer => {
                let dk = deal(&backend, n, f, &mut rng_for(cfg.seed, "dealer", 0));
                let rules = DealerRules::new(backend.clone(), Arc::new(dk.vk.clone()));
                dealer_keys = Some(dk);
                base_validator.with_rules(Arc::new(rules))
            }
            BeaconKind::Trustless => {
                let pairs = DedicatedKeyPairs::generate(&backend, n, &mut rng_for(cfg.seed, "dedicated", 0));
                let tc = Arc::new(TrustlessConfig { backend: backend.clone(), n, f, pks: Arc::new(pairs.public.clone()) });
                let cache = Arc::new(SetupCache::new());
                let rules = TrustlessRules::new(tc.clone(), cache.clone());
                trustless = Some((tc, cache, pairs));
                base_validator.with_rules(Arc::new(rules))
            }
        };

        let bomb_plan = match cfg.bomb_params() {
            Some((depth, start)) => Some(
                ForkBombPlan::new(depth, start, &cfg.bombers()).map_err(|e| ConfigError::Unsupported(e.to_string()))?,
            ),
            None => None,
        };
        let coordinator = bomb_plan.as_ref().map(|p| p.nodes[2 * p.depth - 2]);

        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let beacon = match (&dealer_keys, &trustless) {
                (Some(dk), _) => BeaconSetup::Dealer(dk.for_holder(i)),
                (None, Some((tc, cache, pairs))) => {
                    BeaconSetup::Trustless { cfg: tc.clone(), cache: cache.clone(), secret_keys: pairs.recipient_keys(i) }
                }
                _ => unreachable!(),
            };
            let stop_after = bomb_plan.as_ref().and_then(|p| p.pair_of(i).map(|k| p.fork_round(k) - 1));
            let bomb = match (&bomb_plan, coordinator) {
                (Some(p), Some(c)) if c == i => Some(BombKit {
                    plan: ForkBombPlan { depth: p.depth, start: p.start, nodes: p.nodes.clone() },
                    keys: p.nodes.iter().map(|&j| (j, keys[j].clone())).collect(),
                    coin_keys: p
                        .nodes
                        .iter()
                        .filter_map(|&j| dealer_keys.as_ref().and_then(|dk| dk.tk[j].clone()).map(|t| (j, t)))
                        .collect(),
                }),
                _ => None,
            };
            nodes.push(Node::new(NodeSetup {
                me: i,
                n,
                mode: cfg.mode,
                backend: backend.clone(),
                sk: keys[i].clone(),
                validator: validator.clone(),
                beacon,
                behaviors: cfg.behaviors(i),
                weakened: cfg.weakened,
                c_b: cfg.c_b,
                rng: rng_for(cfg.seed, "node", i as u64),
                audit: opts.audit,
                snapshots: opts.snapshots,
                probe_heads: opts.probe_heads,
                stop_after,
                bomb,
            }));
        }
        let crashed: Vec<bool> = (0..n).map(|i| cfg.is_crashed(i)).collect();
        let mut world = SimWorld::new(nodes, cfg.scheduler.clone(), crashed.clone(), cfg.seed);
        if let Some(h) = opts.horizon {
            world = world.with_horizon(h);
        }
        let honest = cfg.honest();
        let live_honest = honest.iter().copied().filter(|&i| !crashed[i]).collect();
        Ok(Scenario {
            rng: rng_for(cfg.seed, "txs", 0),
            cfg,
            world,
            dealer_keys,
            honest,
            live_honest,
            tx_acc: 0.0,
            tx_count: 0,
            inputs: HashMap::new(),
        })
    }

    pub fn honest(&self) -> &[NodeId] {
        &self.honest
    }

    pub fn node(&self, i: NodeId) -> &Node {
        &self.world.nodes[i]
    }

    pub fn honest_nodes(&self) -> impl Iterator<Item = &Node> {
        self.honest.iter().map(|&i| &self.world.nodes[i])
    }

    /// Gives `tx` to `targets` and records its first input.
    pub fn inject_to(&mut self, tx: Vec<u8>, targets: &[NodeId]) {
        let id = TxId::of(&tx);
        let info = self.world.info();
        self.inputs.entry(id).or_insert((info.async_round, info.step));
        for &t in targets {
            self.world.nodes[t].input_tx(tx.clone());
        }
    }

    fn inject_scheduled(&mut self) {
        if self.cfg.tx_rate <= 0.0 || self.live_honest.is_empty() {
            return;
        }
        self.tx_acc += self.cfg.tx_rate;
        while self.tx_acc >= 1.0 {
            self.tx_acc -= 1.0;
            let k = self.cfg.tx_fanout.clamp(1, self.live_honest.len());
            let picks = sample(&mut self.rng, self.live_honest.len(), k);
            let targets: Vec<NodeId> = picks.iter().map(|p| self.live_honest[p]).collect();
            let nonce: u64 = self.rng.gen();
            let tx = format!("tx {} {} {:016x}", self.cfg.seed, self.tx_count, nonce).into_bytes();
            self.tx_count += 1;
            self.inject_to(tx, &targets);
        }
    }

    pub fn step(&mut self) -> Result<NodeId, SimError> {
        self.inject_scheduled();
        self.world.step()
    }

    /// Steps until `done` holds or `max_steps` more steps were taken.
    pub fn run_until(&mut self, max_steps: u64, mut done: impl FnMut(&Scenario) -> bool) -> Result<bool, SimError> {
        for _ in 0..max_steps {
            if done(self) {
                return Ok(true);
            }
            self.step()?;
        }
        Ok(done(self))
    }

    /// Runs the configured step budget.
    pub fn run(&mut self) -> Result<(), SimError> {
        let budget = self.cfg.budget;
        self.run_until(budget, |_| false).map(|_| ())
    }

    pub fn min_honest_heads(&self) -> usize {
        self.live_honest.iter().map(|&i| self.world.nodes[i].rec.heads.len()).min().unwrap_or(0)
    }

    pub fn min_honest_height(&self) -> i64 {
        self.live_honest.iter().map(|&i| self.world.nodes[i].dag.height_i64()).min().unwrap_or(-1)
    }

    /// All honest output logs are prefixes of one another and all honest
    /// head sequences agree.
    pub fn agreement(&self) -> bool {
        let nodes: Vec<&Node> = self.honest_nodes().collect();
        for a in &nodes {
            for b in &nodes {
                if !a.log.consistent_with(&b.log) {
                    return false;
                }
                let k = a.rec.heads.len().min(b.rec.heads.len());
                if a.rec.heads[..k].iter().zip(&b.rec.heads[..k]).any(|(x, y)| x.head != y.head) {
                    return false;
                }
            }
        }
        true
    }

    /// Output latencies in async rounds, one per (honest node, transaction).
    pub fn latencies(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for node in self.honest_nodes() {
            for (pos, id) in node.log.entries().iter().enumerate() {
                if let Some(&(input, _)) = self.inputs.get(id) {
                    out.push(node.rec.output_rounds[pos].saturating_sub(input));
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn summary(&self) -> Summary {
        let rounds = self.world.async_round();
        let lat = self.latencies();
        let bytes: u64 = self.honest.iter().map(|&i| self.world.traffic.total_bytes(i)).sum();
        let per = if self.honest.is_empty() || rounds == 0 {
            0.0
        } else {
            bytes as f64 / self.honest.len() as f64 / rounds as f64
        };
        let mut faults = Vec::new();
        for node in self.honest_nodes() {
            faults.extend(node.rec.faults.iter().map(|f| format!("node {}: {f}", node.me)));
        }
        Summary {
            steps: self.world.step_count(),
            async_rounds: rounds,
            min_heads: self.min_honest_heads(),
            max_heads: self.live_honest.iter().map(|&i| self.world.nodes[i].rec.heads.len()).max().unwrap_or(0),
            min_outputs: self.live_honest.iter().map(|&i| self.world.nodes[i].log.len()).min().unwrap_or(0),
            injected: self.inputs.len(),
            latency_median: quantile(&lat, 0.5),
            latency_p95: quantile(&lat, 0.95),
            bytes_per_node_per_round: per,
            agreement: self.agreement(),
            faults,
        }
    }

    /// Bytes sent per message kind, summed over honest nodes.
    pub fn honest_traffic(&self) -> BTreeMap<&'static str, u64> {
        let mut out = BTreeMap::new();
        for &i in &self.honest {
            for (k, v) in &self.world.traffic.bytes[i] {
                *out.entry(*k).or_insert(0) += v;
            }
        }
        out
    }
}
