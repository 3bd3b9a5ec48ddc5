use std::sync::Arc;

use super::dag::{ChDag, UnitIdx};
use super::unit::{Payload, Unit};
use crate::crypto::{GroupBackend, SigningKey};
use crate::{NodeId, Round};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum NotReady {
    #[error("{have} creators at round {round}, need {need}")]
    Threshold { round: Round, have: usize, need: usize },
    #[error("own unit of round {0} missing")]
    OwnParent(Round),
}

/// Whether `creator` may build its round-`r` unit on `dag`.
///
/// Round 0 is always ready. Later rounds need 2f+1 distinct creators
/// (known forkers excluded) at round r−1 and the creator's own r−1 unit.
pub fn ready_to_create(dag: &ChDag, creator: NodeId, r: Round) -> Result<(), NotReady> {
    if r == 0 {
        return Ok(());
    }
    let have = dag.creators_at_round(r - 1, true);
    if have < dag.quorum() {
        return Err(NotReady::Threshold { round: r - 1, have, need: dag.quorum() });
    }
    if dag.unit_at(creator, r - 1).is_none() {
        return Err(NotReady::OwnParent(r - 1));
    }
    Ok(())
}

/// Parents for a round-`r` unit: the maximal unit below round r of every
/// creator, never a known forker's.
pub fn choose_parents(dag: &ChDag, r: Round) -> Vec<UnitIdx> {
    if r == 0 {
        return Vec::new();
    }
    dag.maximal_by_creator(Some(r), true)
}

pub fn create_unit(
    dag: &ChDag,
    backend: &GroupBackend,
    sk: &SigningKey,
    creator: NodeId,
    r: Round,
    payload: Payload,
) -> Result<Arc<Unit>, NotReady> {
    ready_to_create(dag, creator, r)?;
    let parents = choose_parents(dag, r).into_iter().map(|i| dag.hash(i)).collect();
    Ok(Arc::new(Unit::new_signed(backend, sk, creator, r, parents, payload)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chdag::fixtures::TestNet;
    use crate::chdag::DagMode;

    #[test]
    fn round_zero_has_no_parents() {
        let net = TestNet::new(4);
        let dag = ChDag::new(4, DagMode::Rbc);
        let u = create_unit(&dag, &net.backend, &net.keys[0], 0, 0, Payload::default()).unwrap();
        assert!(u.parents().is_empty());
    }

    #[test]
    fn three_round_zero_units_suffice() {
        let net = TestNet::new(4);
        let mut dag = ChDag::new(4, DagMode::Rbc);
        for c in 0..3 {
            dag.insert(net.unit(c, 0, &[])).unwrap();
        }
        let u = create_unit(&dag, &net.backend, &net.keys[0], 0, 1, Payload::default()).unwrap();
        assert_eq!(u.parents().len(), 3);
        assert_eq!(net.validator().validate(&u, &dag), Ok(1));
        dag.insert(net.unit(3, 0, &[])).unwrap();
        let mut short = ChDag::new(4, DagMode::Rbc);
        for c in 0..2 {
            short.insert(net.unit(c, 0, &[])).unwrap();
        }
        assert_eq!(
            create_unit(&short, &net.backend, &net.keys[0], 0, 1, Payload::default()).unwrap_err(),
            NotReady::Threshold { round: 0, have: 2, need: 3 }
        );
    }

    #[test]
    fn round_two_takes_maximal_parents() {
        let net = TestNet::new(4);
        let mut dag = ChDag::new(4, DagMode::Rbc);
        let r0: Vec<_> = (0..4).map(|c| net.unit(c, 0, &[])).collect();
        for u in &r0 {
            dag.insert(u.clone()).unwrap();
        }
        let r1: Vec<_> = (0..3).map(|c| net.unit(c, 1, &r0)).collect();
        for u in &r1 {
            dag.insert(u.clone()).unwrap();
        }
        let u = create_unit(&dag, &net.backend, &net.keys[0], 0, 2, Payload::default()).unwrap();
        assert_eq!(u.parents().len(), 4);
        let rounds: Vec<_> = u.parents().iter().map(|h| dag.round(dag.lookup(h).unwrap())).collect();
        assert_eq!(rounds.iter().filter(|&&r| r == 1).count(), 3);
        assert_eq!(rounds.iter().filter(|&&r| r == 0).count(), 1);
        assert_eq!(net.validator().validate(&u, &dag), Ok(2));
    }
}
