//! RBC wire messages.
//!
//! ```text
//! message  := kind:u8 | instance | root:digest | body
//! instance := tag:u8 | proposer:u32 | slot:u64     (tag 0 unit, 1 alert)
//! body     := branch | share:bytes                 (propose, prevote)
//!           | ε                                    (commit)
//! branch   := count:u32 | digest*
//! ```

use serde::{Deserialize, Serialize};

use crate::crypto::{Digest, DIGEST_LEN};
use crate::wire::{Reader, WireError, Writer};
use crate::{NodeId, Round};

/// One broadcast instance: a unit at (proposer, round) or an alert (issuer, id).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstanceId {
    Unit { proposer: NodeId, round: Round },
    Alert { issuer: NodeId, id: u64 },
}

impl InstanceId {
    pub fn proposer(&self) -> NodeId {
        match *self {
            InstanceId::Unit { proposer, .. } => proposer,
            InstanceId::Alert { issuer, .. } => issuer,
        }
    }

    fn encode(&self, w: &mut Writer) {
        match *self {
            InstanceId::Unit { proposer, round } => w.u8(0).index(proposer).u64(round as u64),
            InstanceId::Alert { issuer, id } => w.u8(1).index(issuer).u64(id),
        };
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let tag = r.u8()?;
        let proposer = r.index()?;
        let slot = r.u64()?;
        match tag {
            0 => Ok(InstanceId::Unit {
                proposer,
                round: u32::try_from(slot).map_err(|_| WireError::NonCanonical("round".into()))?,
            }),
            1 => Ok(InstanceId::Alert { issuer: proposer, id: slot }),
            t => Err(WireError::BadTag(t)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RbcBody {
    Propose { branch: Vec<Digest>, share: Vec<u8> },
    Prevote { branch: Vec<Digest>, share: Vec<u8> },
    Commit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RbcMessage {
    pub instance: InstanceId,
    pub root: Digest,
    pub body: RbcBody,
}

impl RbcMessage {
    pub fn kind(&self) -> &'static str {
        match self.body {
            RbcBody::Propose { .. } => "propose",
            RbcBody::Prevote { .. } => "prevote",
            RbcBody::Commit => "commit",
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        let (tag, rest) = match &self.body {
            RbcBody::Propose { branch, share } => (0u8, Some((branch, share))),
            RbcBody::Prevote { branch, share } => (1u8, Some((branch, share))),
            RbcBody::Commit => (2u8, None),
        };
        w.u8(tag);
        self.instance.encode(&mut w);
        w.digest(&self.root);
        if let Some((branch, share)) = rest {
            w.index(branch.len());
            for d in branch {
                w.digest(d);
            }
            w.bytes(share);
        }
        w.into_bytes()
    }

    /// Length of `encode()` without building it.
    pub fn encoded_len(&self) -> usize {
        let head = 1 + 13 + DIGEST_LEN;
        match &self.body {
            RbcBody::Propose { branch, share } | RbcBody::Prevote { branch, share } => {
                head + 4 + branch.len() * DIGEST_LEN + 4 + share.len()
            }
            RbcBody::Commit => head,
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let tag = r.u8()?;
        let instance = InstanceId::decode(&mut r)?;
        let root = r.digest()?;
        let body = match tag {
            0 | 1 => {
                let nb = r.count(DIGEST_LEN)?;
                let branch = (0..nb).map(|_| r.digest()).collect::<Result<Vec<_>, _>>()?;
                let share = r.bytes()?.to_vec();
                if tag == 0 {
                    RbcBody::Propose { branch, share }
                } else {
                    RbcBody::Prevote { branch, share }
                }
            }
            2 => RbcBody::Commit,
            t => return Err(WireError::BadTag(t)),
        };
        r.finish()?;
        Ok(RbcMessage { instance, root, body })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_commit_encoding() {
        let m = RbcMessage {
            instance: InstanceId::Unit { proposer: 2, round: 5 },
            root: Digest([0xab; 32]),
            body: RbcBody::Commit,
        };
        let hex = hex::encode(m.encode());
        assert_eq!(&hex[..28], "0200000000020000000000000005");
        assert_eq!(hex.len(), 2 * m.encoded_len());
        assert_eq!(RbcMessage::decode(&m.encode()).unwrap(), m);
    }

    #[test]
    fn prevote_round_trip() {
        let m = RbcMessage {
            instance: InstanceId::Alert { issuer: 1, id: 9 },
            root: Digest([1; 32]),
            body: RbcBody::Prevote { branch: vec![Digest([2; 32]), Digest([3; 32])], share: vec![4, 5, 6] },
        };
        let bytes = m.encode();
        assert_eq!(bytes.len(), m.encoded_len());
        assert_eq!(RbcMessage::decode(&bytes).unwrap(), m);
    }
}
