//! JSON-lines dag dumps: one unit per line, hashes in hex.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::dag::ChDag;
use super::unit::Unit;

#[derive(Serialize, Deserialize)]
pub struct DumpLine {
    pub hash: String,
    pub creator: usize,
    pub round: u32,
    pub parents: Vec<String>,
    pub encoded: String,
}

impl DumpLine {
    pub fn of(u: &Unit) -> Self {
        DumpLine {
            hash: u.hash().to_hex(),
            creator: u.creator(),
            round: u.round(),
            parents: u.parents().iter().map(|p| p.to_hex()).collect(),
            encoded: hex::encode(u.canonical_encode()),
        }
    }
}

/// Writes units in insertion order, which is parent-closed.
pub fn dump_dag<W: Write>(dag: &ChDag, out: &mut W) -> std::io::Result<()> {
    dump_units(dag.units().iter().map(|u| u.as_ref()), out)
}

pub fn dump_units<'a, W: Write>(units: impl Iterator<Item = &'a Unit>, out: &mut W) -> std::io::Result<()> {
    for u in units {
        serde_json::to_writer(&mut *out, &DumpLine::of(u))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads units back, checking each hash against its encoding.
pub fn load_units<R: BufRead>(input: R) -> Result<Vec<Unit>, String> {
    let mut out = Vec::new();
    for (no, line) in input.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let d: DumpLine = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", no + 1))?;
        let bytes = hex::decode(&d.encoded).map_err(|e| format!("line {}: {e}", no + 1))?;
        let u = Unit::canonical_decode(&bytes).map_err(|e| format!("line {}: {e}", no + 1))?;
        if u.hash().to_hex() != d.hash {
            return Err(format!("line {}: hash mismatch", no + 1));
        }
        out.push(u);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chdag::fixtures::TestNet;
    use crate::chdag::DagMode;

    #[test]
    fn dump_round_trip() {
        let net = TestNet::new(4);
        let mut dag = ChDag::new(4, DagMode::Rbc);
        let r0: Vec<_> = (0..4).map(|c| net.unit(c, 0, &[])).collect();
        for u in &r0 {
            dag.insert(u.clone()).unwrap();
        }
        dag.insert(net.unit(1, 1, &r0)).unwrap();
        let mut buf = Vec::new();
        dump_dag(&dag, &mut buf).unwrap();
        let units = load_units(&buf[..]).unwrap();
        assert_eq!(units.len(), 5);
        assert_eq!(units[4], **dag.unit(4));
    }
}
