//! Ordered transaction output.

use std::collections::HashSet;

use super::txbuf::TxId;
use crate::chdag::{ChDag, UnitIdx};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputEvent {
    pub pos: u64,
    pub tx: TxId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("ordered units are not an extension of the emitted prefix ({emitted} emitted, order has {len})")]
pub struct PrefixFault {
    pub emitted: usize,
    pub len: usize,
}

/// Gapless `Output(pos, tx)` log; the first ordered occurrence wins.
#[derive(Default)]
pub struct OutputLog {
    entries: Vec<TxId>,
    seen: HashSet<TxId>,
    units_consumed: usize,
}

impl OutputLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[TxId] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &TxId) -> bool {
        self.seen.contains(id)
    }

    pub fn units_consumed(&self) -> usize {
        self.units_consumed
    }

    /// Emits the transactions of `order[units_consumed..]`.
    pub fn emit_outputs(&mut self, order: &[UnitIdx], dag: &ChDag) -> Result<Vec<OutputEvent>, PrefixFault> {
        if order.len() < self.units_consumed {
            return Err(PrefixFault { emitted: self.units_consumed, len: order.len() });
        }
        let mut out = Vec::new();
        for &u in &order[self.units_consumed..] {
            for tx in &dag.unit(u).payload().transactions {
                let id = TxId::of(tx);
                if self.seen.insert(id) {
                    out.push(OutputEvent { pos: self.entries.len() as u64, tx: id });
                    self.entries.push(id);
                }
            }
        }
        self.units_consumed = order.len();
        Ok(out)
    }

    /// One log is a prefix of the other.
    pub fn consistent_with(&self, other: &OutputLog) -> bool {
        let k = self.entries.len().min(other.entries.len());
        self.entries[..k] == other.entries[..k]
    }
}
