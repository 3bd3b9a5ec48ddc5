//! Per-node metric records as JSON lines.

use std::io::{self, Write};

use serde::Serialize;

use super::scenario::Scenario;

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricRecord {
    Head { node: usize, round: u32, height: u32, async_round: u32, head: String },
    Output { node: usize, pos: usize, tx_id: String, async_round: u32, latency: Option<u32> },
    Traffic { node: usize, bytes: u64, messages: u64 },
    Toss { node: usize, nonce: u64, requested: u32, output: Option<u32>, value: Option<String> },
}

pub fn collect(s: &Scenario) -> Vec<MetricRecord> {
    let mut out = Vec::new();
    for node in s.honest_nodes() {
        let me = node.me;
        for h in &node.rec.heads {
            out.push(MetricRecord::Head {
                node: me,
                round: h.round,
                height: h.height,
                async_round: h.async_round,
                head: h.head.to_hex(),
            });
        }
        for (pos, id) in node.log.entries().iter().enumerate() {
            let at = node.rec.output_rounds[pos];
            out.push(MetricRecord::Output {
                node: me,
                pos,
                tx_id: id.to_hex(),
                async_round: at,
                latency: s.inputs.get(id).map(|&(input, _)| at.saturating_sub(input)),
            });
        }
        for (&nonce, &requested) in &node.rec.toss_requested {
            let done = node.rec.toss_outputs.get(&nonce);
            out.push(MetricRecord::Toss {
                node: me,
                nonce,
                requested,
                output: done.map(|d| d.1),
                value: done.map(|d| d.0.to_hex()),
            });
        }
        out.push(MetricRecord::Traffic {
            node: me,
            bytes: s.world.traffic.total_bytes(me),
            messages: s.world.traffic.messages[me].values().sum(),
        });
    }
    out
}

pub fn write_jsonl<W: Write>(records: &[MetricRecord], mut w: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Timeline of a run: async-round boundaries and unit creation events.
#[derive(Clone, Debug, Serialize)]
pub struct Trace {
    pub seed: u64,
    pub steps: u64,
    /// Step closing each async round.
    pub round_ends: Vec<u64>,
    /// (node, dag round, async round) for every unit an honest node created.
    pub created: Vec<(usize, u32, u32)>,
}

pub fn trace(s: &Scenario) -> Trace {
    let mut created = Vec::new();
    for node in s.honest_nodes() {
        created.extend(node.rec.created.iter().map(|(&r, &at)| (node.me, r, at)));
    }
    Trace {
        seed: s.cfg.seed,
        steps: s.world.step_count(),
        round_ends: s.world.tracker().boundaries().to_vec(),
        created,
    }
}
