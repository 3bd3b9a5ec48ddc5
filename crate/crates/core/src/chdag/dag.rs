use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::unit::{Unit, UnitCoords};
use super::{DagError, DagMode};
use crate::crypto::Digest;
use crate::{NodeId, Round};

/// Dense index of a unit inside one dag.
pub type UnitIdx = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inserted {
    New(UnitIdx),
    Duplicate(UnitIdx),
}

impl Inserted {
    pub fn index(self) -> UnitIdx {
        match self {
            Inserted::New(i) | Inserted::Duplicate(i) => i,
        }
    }
}

#[derive(Default)]
struct Marks {
    stamp: Vec<u32>,
    epoch: u32,
}

impl Marks {
    fn begin(&mut self, len: usize) -> u32 {
        if self.stamp.len() < len {
            self.stamp.resize(len, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.epoch
    }
}

/// One node's local copy of the communication-history dag.
pub struct ChDag {
    n: usize,
    mode: DagMode,
    units: Vec<Arc<Unit>>,
    rounds: Vec<Round>,
    parents: Vec<Vec<UnitIdx>>,
    round_parents: Vec<Vec<UnitIdx>>,
    index: HashMap<Digest, UnitIdx>,
    by_coords: HashMap<(NodeId, Round), Vec<UnitIdx>>,
    by_round: Vec<Vec<UnitIdx>>,
    creators_at: Vec<Vec<bool>>,
    top_round: Vec<Option<Round>>,
    height: Option<Round>,
    forkers: BTreeSet<NodeId>,
    marks: RefCell<Marks>,
}

impl ChDag {
    pub fn new(n: usize, mode: DagMode) -> Self {
        ChDag {
            n,
            mode,
            units: Vec::new(),
            rounds: Vec::new(),
            parents: Vec::new(),
            round_parents: Vec::new(),
            index: HashMap::new(),
            by_coords: HashMap::new(),
            by_round: Vec::new(),
            creators_at: Vec::new(),
            top_round: vec![None; n],
            height: None,
            forkers: BTreeSet::new(),
            marks: RefCell::new(Marks::default()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        (self.n - 1) / 3
    }

    pub fn quorum(&self) -> usize {
        2 * self.f() + 1
    }

    pub fn mode(&self) -> DagMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Maximal round present, `None` for an empty dag.
    pub fn height(&self) -> Option<Round> {
        self.height
    }

    /// Height as a signed number, -1 when empty.
    pub fn height_i64(&self) -> i64 {
        self.height.map_or(-1, i64::from)
    }

    pub fn unit(&self, i: UnitIdx) -> &Arc<Unit> {
        &self.units[i]
    }

    pub fn units(&self) -> &[Arc<Unit>] {
        &self.units
    }

    pub fn round(&self, i: UnitIdx) -> Round {
        self.rounds[i]
    }

    pub fn creator(&self, i: UnitIdx) -> NodeId {
        self.units[i].creator()
    }

    pub fn hash(&self, i: UnitIdx) -> Digest {
        self.units[i].hash()
    }

    pub fn parents(&self, i: UnitIdx) -> &[UnitIdx] {
        &self.parents[i]
    }

    /// Parents of round ρ(U) − 1.
    pub fn round_parents(&self, i: UnitIdx) -> &[UnitIdx] {
        &self.round_parents[i]
    }

    pub fn lookup(&self, h: &Digest) -> Option<UnitIdx> {
        self.index.get(h).copied()
    }

    pub fn contains(&self, h: &Digest) -> bool {
        self.index.contains_key(h)
    }

    pub fn units_at_round(&self, r: Round) -> &[UnitIdx] {
        self.by_round.get(r as usize).map_or(&[], |v| v.as_slice())
    }

    /// Variants at (creator, round), hash-sorted.
    pub fn variants(&self, creator: NodeId, r: Round) -> &[UnitIdx] {
        self.by_coords.get(&(creator, r)).map_or(&[], |v| v.as_slice())
    }

    /// Variant 0 at (creator, round).
    pub fn unit_at(&self, creator: NodeId, r: Round) -> Option<UnitIdx> {
        self.variants(creator, r).first().copied()
    }

    pub fn coords(&self, i: UnitIdx) -> UnitCoords {
        let creator = self.creator(i);
        let round = self.rounds[i];
        let variant = self.variants(creator, round).iter().position(|&x| x == i).unwrap_or(0);
        UnitCoords { creator, round, variant }
    }

    pub fn forkers(&self) -> &BTreeSet<NodeId> {
        &self.forkers
    }

    pub fn is_forker(&self, c: NodeId) -> bool {
        self.forkers.contains(&c)
    }

    /// Highest round of any unit by `c`.
    pub fn top_round(&self, c: NodeId) -> Option<Round> {
        self.top_round.get(c).copied().flatten()
    }

    /// Distinct creators with a unit of round `r`, optionally ignoring known forkers.
    pub fn creators_at_round(&self, r: Round, skip_forkers: bool) -> usize {
        self.creators_at.get(r as usize).map_or(0, |v| {
            v.iter().enumerate().filter(|(c, &present)| present && !(skip_forkers && self.is_forker(*c))).count()
        })
    }

    /// Computes ρ(U) from the parents' cached rounds.
    pub fn round_of(&self, u: &Unit) -> Result<Round, DagError> {
        let mut missing = Vec::new();
        let mut top: Option<Round> = None;
        for p in u.parents() {
            match self.lookup(p) {
                Some(i) => top = Some(top.map_or(self.rounds[i], |t| t.max(self.rounds[i]))),
                None => missing.push(*p),
            }
        }
        if !missing.is_empty() {
            return Err(DagError::Dangling(missing));
        }
        Ok(top.map_or(0, |t| t + 1))
    }

    /// Stores a unit whose parents are all present. Duplicates are no-ops.
    pub fn insert(&mut self, u: Arc<Unit>) -> Result<Inserted, DagError> {
        let h = u.hash();
        if let Some(i) = self.lookup(&h) {
            return Ok(Inserted::Duplicate(i));
        }
        if u.creator() >= self.n {
            return Err(DagError::UnknownCreator(u.creator()));
        }
        let round = self.round_of(&u)?;
        let creator = u.creator();
        if self.mode == DagMode::Rbc && !self.variants(creator, round).is_empty() {
            return Err(DagError::Fork { creator, round });
        }
        let idx = self.units.len();
        let parents: Vec<UnitIdx> = u.parents().iter().map(|p| self.index[p]).collect();
        let round_parents = parents.iter().copied().filter(|&p| round > 0 && self.rounds[p] == round - 1).collect();
        self.units.push(u);
        self.rounds.push(round);
        self.parents.push(parents);
        self.round_parents.push(round_parents);
        self.index.insert(h, idx);
        let slot = self.by_coords.entry((creator, round)).or_default();
        let units = &self.units;
        let pos = slot.partition_point(|&j| units[j].hash() < h);
        slot.insert(pos, idx);
        if slot.len() > 1 {
            self.forkers.insert(creator);
        }
        let r = round as usize;
        let n = self.n;
        if self.by_round.len() <= r {
            self.by_round.resize_with(r + 1, Vec::new);
            self.creators_at.resize_with(r + 1, || vec![false; n]);
        }
        self.by_round[r].push(idx);
        self.creators_at[r][creator] = true;
        self.top_round[creator] = Some(self.top_round[creator].map_or(round, |t| t.max(round)));
        self.height = Some(self.height.map_or(round, |t| t.max(round)));
        Ok(Inserted::New(idx))
    }

    /// U ≤ V: V reaches U through parent links (reflexive).
    pub fn is_below(&self, u: UnitIdx, v: UnitIdx) -> bool {
        if u == v {
            return true;
        }
        let ru = self.rounds[u];
        let rv = self.rounds[v];
        if ru >= rv {
            return false;
        }
        if ru + 1 == rv {
            return self.round_parents[v].contains(&u);
        }
        let mut marks = self.marks.borrow_mut();
        let epoch = marks.begin(self.units.len());
        let mut stack = vec![v];
        marks.stamp[v] = epoch;
        while let Some(x) = stack.pop() {
            for &p in &self.parents[x] {
                if p == u {
                    return true;
                }
                if self.rounds[p] > ru && marks.stamp[p] != epoch {
                    marks.stamp[p] = epoch;
                    stack.push(p);
                }
            }
        }
        false
    }

    /// Every unit below `v` (including `v`) with round ≥ `min_round`.
    pub fn lower_cone(&self, v: UnitIdx, min_round: Round) -> Vec<UnitIdx> {
        self.lower_cone_of(&[v], min_round)
    }

    /// Union of the lower cones of `tops`, restricted to rounds ≥ `min_round`.
    pub fn lower_cone_of(&self, tops: &[UnitIdx], min_round: Round) -> Vec<UnitIdx> {
        self.collect_below(tops, |x| self.rounds[x] >= min_round)
    }

    /// Units below `tops` accepted by `keep`; the walk does not continue
    /// through rejected units.
    pub fn collect_below(&self, tops: &[UnitIdx], keep: impl Fn(UnitIdx) -> bool) -> Vec<UnitIdx> {
        let mut marks = self.marks.borrow_mut();
        let epoch = marks.begin(self.units.len());
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for &t in tops {
            if marks.stamp[t] != epoch && keep(t) {
                marks.stamp[t] = epoch;
                stack.push(t);
            }
        }
        while let Some(x) = stack.pop() {
            out.push(x);
            for &p in &self.parents[x] {
                if marks.stamp[p] != epoch && keep(p) {
                    marks.stamp[p] = epoch;
                    stack.push(p);
                }
            }
        }
        out
    }

    /// Per creator, its unit of highest round below `below` (all rounds if
    /// `None`). Forked variants resolve to the lowest hash; known forkers
    /// are skipped when `skip_forkers` is set.
    pub fn maximal_by_creator(&self, below: Option<Round>, skip_forkers: bool) -> Vec<UnitIdx> {
        let mut out = Vec::new();
        for c in 0..self.n {
            if skip_forkers && self.is_forker(c) {
                continue;
            }
            let Some(top) = self.top_round(c) else { continue };
            let start = match below {
                Some(0) => continue,
                Some(b) => top.min(b - 1),
                None => top,
            };
            let mut r = start;
            loop {
                if let Some(i) = self.unit_at(c, r) {
                    out.push(i);
                    break;
                }
                if r == 0 {
                    break;
                }
                r -= 1;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chdag::fixtures::TestNet;

    #[test]
    fn rounds_follow_parents() {
        let net = TestNet::new(4);
        let mut dag = ChDag::new(4, DagMode::Rbc);
        let r0: Vec<_> = (0..4).map(|c| net.unit(c, 0, &[])).collect();
        for u in &r0 {
            dag.insert(u.clone()).unwrap();
        }
        let u = net.unit(0, 1, &r0[..3]);
        assert_eq!(dag.round_of(&u).unwrap(), 1);
        let i = dag.insert(u).unwrap().index();
        assert_eq!(dag.round(i), 1);
        assert!(dag.is_below(dag.lookup(&r0[1].hash()).unwrap(), i));
        assert!(!dag.is_below(dag.lookup(&r0[3].hash()).unwrap(), i));
        assert!(!dag.is_below(0, 1));
        assert_eq!(dag.height(), Some(1));
    }

    #[test]
    fn dangling_unit_reported() {
        let net = TestNet::new(4);
        let dag = ChDag::new(4, DagMode::Rbc);
        let p = net.unit(1, 0, &[]);
        let u = net.unit(0, 1, &[p.clone()]);
        assert_eq!(dag.round_of(&u), Err(DagError::Dangling(vec![p.hash()])));
    }

    #[test]
    fn duplicate_insert_is_noop() {
        let net = TestNet::new(4);
        let mut dag = ChDag::new(4, DagMode::Rbc);
        let u = net.unit(2, 0, &[]);
        assert_eq!(dag.insert(u.clone()).unwrap(), Inserted::New(0));
        assert_eq!(dag.insert(u).unwrap(), Inserted::Duplicate(0));
        assert_eq!(dag.len(), 1);
    }

    #[test]
    fn forks_tracked_in_quick_mode_only() {
        let net = TestNet::new(4);
        let a = net.unit_with_txs(1, 0, &[], vec![b"a".to_vec()]);
        let b = net.unit_with_txs(1, 0, &[], vec![b"b".to_vec()]);
        let mut rbc = ChDag::new(4, DagMode::Rbc);
        rbc.insert(a.clone()).unwrap();
        assert_eq!(rbc.insert(b.clone()), Err(DagError::Fork { creator: 1, round: 0 }));

        let mut quick = ChDag::new(4, DagMode::Quick);
        quick.insert(a.clone()).unwrap();
        quick.insert(b.clone()).unwrap();
        let v = quick.variants(1, 0);
        assert_eq!(v.len(), 2);
        assert!(quick.hash(v[0]) < quick.hash(v[1]));
        assert!(quick.is_forker(1));
        let lowest = if a.hash() < b.hash() { &a } else { &b };
        let max = quick.maximal_by_creator(None, false);
        assert_eq!(quick.hash(max[0]), lowest.hash());
        assert!(quick.maximal_by_creator(None, true).is_empty());
    }

    #[test]
    fn maximal_by_creator_after_three_rounds() {
        let net = TestNet::new(4);
        let mut dag = ChDag::new(4, DagMode::Rbc);
        let mut prev: Vec<Arc<Unit>> = Vec::new();
        for r in 0..3 {
            let layer: Vec<_> = (0..4).map(|c| net.unit(c, r, &prev)).collect();
            for u in &layer {
                dag.insert(u.clone()).unwrap();
            }
            prev = layer;
        }
        let max = dag.maximal_by_creator(None, true);
        assert_eq!(max.len(), 4);
        assert!(max.iter().all(|&i| dag.round(i) == 2));
        let below2 = dag.maximal_by_creator(Some(2), true);
        assert!(below2.iter().all(|&i| dag.round(i) == 1));
    }
}
