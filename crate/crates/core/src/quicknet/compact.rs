//! Compact parent encoding: one round entry per creator plus a control hash.
//!
//! ```text
//! compact unit := creator:u32 | round:u32 | entries:u32 | entry* | control:digest | payload | signature
//! entry        := 0:u8 | 1:u8 round:u32
//! ```

use std::sync::Arc;

use crate::chdag::{ChDag, Payload, Unit};
use crate::crypto::{Digest, Hasher, Signature, DIGEST_LEN};
use crate::{NodeId, Round};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompactParents {
    /// L_U: parent round per creator.
    pub rounds: Vec<Option<Round>>,
    /// h_U over the parent hashes in creator order.
    pub control: Digest,
}

pub fn control_hash(hashes_in_creator_order: &[Digest]) -> Digest {
    let mut h = Hasher::new("control-hash");
    for d in hashes_in_creator_order {
        h.part(d.as_bytes());
    }
    h.finish()
}

/// L_U and h_U for a unit whose parents are in `dag`.
pub fn encode_parents(u: &Unit, dag: &ChDag) -> Option<CompactParents> {
    let mut slots: Vec<Option<(Round, Digest)>> = vec![None; dag.n()];
    for p in u.parents() {
        let i = dag.lookup(p)?;
        slots[dag.creator(i)] = Some((dag.round(i), *p));
    }
    let hashes: Vec<Digest> = slots.iter().flatten().map(|(_, h)| *h).collect();
    Some(CompactParents { rounds: slots.iter().map(|s| s.map(|(r, _)| r)).collect(), control: control_hash(&hashes) })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Resolved {
    Parents(Vec<Digest>),
    /// Coordinates with no local unit.
    Missing(Vec<(NodeId, Round)>),
    /// Some coordinates hold several local variants, or the control hash
    /// does not match the unique local choice.
    Ambiguous,
}

pub fn resolve_parents(cp: &CompactParents, dag: &ChDag) -> Resolved {
    if cp.rounds.len() != dag.n() {
        return Resolved::Ambiguous;
    }
    let mut hashes = Vec::new();
    let mut missing = Vec::new();
    let mut ambiguous = false;
    for (c, r) in cp.rounds.iter().enumerate() {
        let Some(r) = *r else { continue };
        match dag.variants(c, r) {
            [] => missing.push((c, r)),
            [one] => hashes.push(dag.hash(*one)),
            _ => ambiguous = true,
        }
    }
    if !missing.is_empty() {
        return Resolved::Missing(missing);
    }
    if ambiguous || control_hash(&hashes) != cp.control {
        return Resolved::Ambiguous;
    }
    Resolved::Parents(hashes)
}

/// A unit as multicast in quick mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompactUnit {
    pub creator: NodeId,
    pub round: Round,
    pub parents: CompactParents,
    pub payload: Payload,
    pub signature: Signature,
    wire_len: usize,
}

impl CompactUnit {
    pub fn from_unit(u: &Unit, dag: &ChDag) -> Option<Self> {
        let parents = encode_parents(u, dag)?;
        let entries: usize = parents.rounds.iter().map(|r| if r.is_some() { 5 } else { 1 }).sum();
        let wire_len = u.encoded_len() - 4 - u.parents().len() * DIGEST_LEN + 4 + entries + DIGEST_LEN;
        Some(CompactUnit {
            creator: u.creator(),
            round: u.round(),
            parents,
            payload: u.payload().clone(),
            signature: u.signature().clone(),
            wire_len,
        })
    }

    pub fn wire_len(&self) -> usize {
        self.wire_len
    }

    /// The full unit once parents resolve; the signature is checked by the
    /// caller as for any other unit.
    pub fn expand(&self, parents: Vec<Digest>) -> Arc<Unit> {
        Arc::new(Unit::with_signature(self.creator, self.round, parents, self.payload.clone(), self.signature.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chdag::fixtures::TestNet;
    use crate::chdag::DagMode;

    fn setup() -> (TestNet, ChDag, Vec<Arc<Unit>>) {
        let net = TestNet::new(4);
        let mut dag = ChDag::new(4, DagMode::Quick);
        let r0: Vec<_> = (0..4).map(|c| net.unit(c, 0, &[])).collect();
        for u in &r0 {
            dag.insert(u.clone()).unwrap();
        }
        (net, dag, r0)
    }

    #[test]
    fn fork_free_resolution_is_exact() {
        let (net, dag, r0) = setup();
        let u = net.unit(1, 1, &r0[..3]);
        let cu = CompactUnit::from_unit(&u, &dag).unwrap();
        assert_eq!(cu.parents.rounds, vec![Some(0), Some(0), Some(0), None]);
        let Resolved::Parents(ps) = resolve_parents(&cu.parents, &dag) else { panic!() };
        let back = cu.expand(ps);
        assert_eq!(back.hash(), u.hash());
        assert!(net.validator().check_context_free(&back).is_ok());
        assert!(cu.wire_len() < u.encoded_len());
        assert_eq!(cu.wire_len(), u.encoded_len() - 3 * DIGEST_LEN + 16 + DIGEST_LEN);
    }

    #[test]
    fn substituted_variant_is_detected() {
        let (net, mut sender, r0) = setup();
        let twin = net.unit_with_txs(2, 0, &[], vec![b"twin".to_vec()]);
        // The sender built on the twin; the receiver only knows the original.
        let mut receiver = ChDag::new(4, DagMode::Quick);
        for u in &r0 {
            receiver.insert(u.clone()).unwrap();
        }
        sender.insert(twin.clone()).unwrap();
        let u = net.unit(1, 1, &[r0[0].clone(), r0[1].clone(), twin.clone()]);
        let cu = CompactUnit::from_unit(&u, &sender).unwrap();
        assert_eq!(resolve_parents(&cu.parents, &receiver), Resolved::Ambiguous);
        // With both variants locally the choice is ambiguous as well.
        assert_eq!(resolve_parents(&cu.parents, &sender), Resolved::Ambiguous);
    }

    #[test]
    fn missing_parents_are_reported() {
        let (net, dag, r0) = setup();
        let r1: Vec<_> = (0..3).map(|c| net.unit(c, 1, &r0)).collect();
        let mut sender = ChDag::new(4, DagMode::Quick);
        for u in r0.iter().chain(&r1) {
            sender.insert(u.clone()).unwrap();
        }
        let u = net.unit(0, 2, &r1);
        let cu = CompactUnit::from_unit(&u, &sender).unwrap();
        assert_eq!(resolve_parents(&cu.parents, &dag), Resolved::Missing(vec![(0, 1), (1, 1), (2, 1)]));
    }

    #[test]
    fn control_hash_substitution_fuzz() {
        use rand::{Rng, SeedableRng};
        let (net, dag, r0) = setup();
        let u = net.unit(0, 1, &r0);
        let cu = CompactUnit::from_unit(&u, &dag).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut bad = cu.parents.clone();
            let k = rng.gen_range(0..DIGEST_LEN);
            bad.control.0[k] ^= 1 << rng.gen_range(0..8);
            assert_eq!(resolve_parents(&bad, &dag), Resolved::Ambiguous);
        }
    }
}
