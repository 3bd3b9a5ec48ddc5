//! Units and their canonical encoding.
//!
//! ```text
//! unit     := creator:u32 | parents | payload | round:u32 | signature
//! parents  := count:u32 | digest*            (strictly ascending)
//! payload  := count:u32 | section*           (strictly ascending tags)
//! section  := tag:u8 | body:bytes
//! ```
//!
//! Section tags: 1 transactions, 2 coin share, 3 key box, 4 key votes,
//! 5 multicoin shares. Empty sections are omitted. The signature covers
//! every byte before it; the unit hash is the hash of the whole encoding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::beacon::keybox::{KeyBox, KeyVote, Verdict};
use crate::crypto::{hash_bytes, schnorr, Ciphertext, Digest, GroupBackend, Signature, SignatureShare, SigningKey};
use crate::wire::{Reader, WireError, Writer};
use crate::{NodeId, Round};

pub type Transaction = Vec<u8>;

/// Share of the aggregated multicoin secret for nonce "owner|round".
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiShare {
    pub owner: NodeId,
    pub share: SignatureShare,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Payload {
    pub transactions: Vec<Transaction>,
    pub coin_share: Option<SignatureShare>,
    pub key_box: Option<KeyBox>,
    pub key_votes: Vec<KeyVote>,
    pub multicoin: Vec<MultiShare>,
}

const TAG_TXS: u8 = 1;
const TAG_COIN: u8 = 2;
const TAG_KEYBOX: u8 = 3;
const TAG_VOTES: u8 = 4;
const TAG_MULTI: u8 = 5;

impl Payload {
    pub fn with_transactions(transactions: Vec<Transaction>) -> Self {
        Payload { transactions, ..Payload::default() }
    }

    pub fn encoded_len(&self) -> usize {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.len()
    }

    fn encode(&self, w: &mut Writer) {
        let mut sections: Vec<(u8, Vec<u8>)> = Vec::new();
        if !self.transactions.is_empty() {
            let mut s = Writer::new();
            s.index(self.transactions.len());
            for tx in &self.transactions {
                s.bytes(tx);
            }
            sections.push((TAG_TXS, s.into_bytes()));
        }
        if let Some(share) = &self.coin_share {
            let mut s = Writer::new();
            s.share(share);
            sections.push((TAG_COIN, s.into_bytes()));
        }
        if let Some(kb) = &self.key_box {
            let mut s = Writer::new();
            s.index(kb.dealer).index(kb.commitment.len());
            for c in &kb.commitment {
                s.element(c);
            }
            s.index(kb.encrypted.len());
            for e in &kb.encrypted {
                s.bytes(&e.0);
            }
            sections.push((TAG_KEYBOX, s.into_bytes()));
        }
        if !self.key_votes.is_empty() {
            let mut s = Writer::new();
            s.index(self.key_votes.len());
            for v in &self.key_votes {
                s.index(v.voter).index(v.dealer);
                match &v.verdict {
                    Verdict::Ok => {
                        s.u8(1);
                    }
                    Verdict::Bad(pt) => {
                        s.u8(0).bytes(pt);
                    }
                }
            }
            sections.push((TAG_VOTES, s.into_bytes()));
        }
        if !self.multicoin.is_empty() {
            let mut s = Writer::new();
            s.index(self.multicoin.len());
            for m in &self.multicoin {
                s.index(m.owner).share(&m.share);
            }
            sections.push((TAG_MULTI, s.into_bytes()));
        }
        w.index(sections.len());
        for (tag, body) in sections {
            w.u8(tag).bytes(&body);
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Payload, WireError> {
        let mut p = Payload::default();
        let count = r.count(5)?;
        let mut last_tag = 0u8;
        for _ in 0..count {
            let tag = r.u8()?;
            if tag <= last_tag {
                return Err(WireError::NonCanonical("section order".into()));
            }
            last_tag = tag;
            let body = r.bytes()?;
            let mut s = Reader::new(body);
            match tag {
                TAG_TXS => {
                    let n = s.count(4)?;
                    for _ in 0..n {
                        p.transactions.push(s.bytes()?.to_vec());
                    }
                    if n == 0 {
                        return Err(WireError::NonCanonical("empty section".into()));
                    }
                }
                TAG_COIN => p.coin_share = Some(s.share()?),
                TAG_KEYBOX => {
                    let dealer = s.index()?;
                    let nc = s.count(1)?;
                    let mut commitment = Vec::with_capacity(nc);
                    for _ in 0..nc {
                        commitment.push(s.element()?);
                    }
                    let ne = s.count(4)?;
                    let mut encrypted = Vec::with_capacity(ne);
                    for _ in 0..ne {
                        encrypted.push(Ciphertext(s.bytes()?.to_vec()));
                    }
                    p.key_box = Some(KeyBox { dealer, commitment, encrypted });
                }
                TAG_VOTES => {
                    let n = s.count(9)?;
                    for _ in 0..n {
                        let voter = s.index()?;
                        let dealer = s.index()?;
                        let verdict = match s.u8()? {
                            1 => Verdict::Ok,
                            0 => Verdict::Bad(s.bytes()?.to_vec()),
                            t => return Err(WireError::BadTag(t)),
                        };
                        p.key_votes.push(KeyVote { voter, dealer, verdict });
                    }
                    if n == 0 {
                        return Err(WireError::NonCanonical("empty section".into()));
                    }
                }
                TAG_MULTI => {
                    let n = s.count(4)?;
                    for _ in 0..n {
                        let owner = s.index()?;
                        p.multicoin.push(MultiShare { owner, share: s.share()? });
                    }
                    if n == 0 {
                        return Err(WireError::NonCanonical("empty section".into()));
                    }
                }
                t => return Err(WireError::BadTag(t)),
            }
            s.finish()?;
        }
        Ok(p)
    }
}

/// (creator, round, variant) with variants ordered by hash.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitCoords {
    pub creator: NodeId,
    pub round: Round,
    pub variant: usize,
}

/// An immutable, signed unit. The hash and encoding are computed once.
#[derive(Clone, PartialEq, Eq)]
pub struct Unit {
    creator: NodeId,
    round: Round,
    parents: Vec<Digest>,
    payload: Payload,
    signature: Signature,
    encoded: Vec<u8>,
    body_len: usize,
    hash: Digest,
}

impl fmt::Debug for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Unit({}@{} {})", self.creator, self.round, self.hash.short())
    }
}

fn encode_body(creator: NodeId, round: Round, parents: &[Digest], payload: &Payload) -> Writer {
    let mut w = Writer::new();
    w.index(creator).index(parents.len());
    for p in parents {
        w.digest(p);
    }
    payload.encode(&mut w);
    w.u32(round);
    w
}

impl Unit {
    /// Builds and signs a unit. Parents are sorted by hash.
    pub fn new_signed(
        b: &GroupBackend,
        sk: &SigningKey,
        creator: NodeId,
        round: Round,
        mut parents: Vec<Digest>,
        payload: Payload,
    ) -> Unit {
        parents.sort();
        parents.dedup();
        let body = encode_body(creator, round, &parents, &payload).into_bytes();
        let signature = sk.sign(b, &body);
        Self::assemble(creator, round, parents, payload, signature, body)
    }

    /// A unit with an arbitrary signature (used to model forged input).
    pub fn with_signature(
        creator: NodeId,
        round: Round,
        mut parents: Vec<Digest>,
        payload: Payload,
        signature: Signature,
    ) -> Unit {
        parents.sort();
        parents.dedup();
        let body = encode_body(creator, round, &parents, &payload).into_bytes();
        Self::assemble(creator, round, parents, payload, signature, body)
    }

    fn assemble(
        creator: NodeId,
        round: Round,
        parents: Vec<Digest>,
        payload: Payload,
        signature: Signature,
        body: Vec<u8>,
    ) -> Unit {
        let body_len = body.len();
        let mut w = Writer::new();
        w.raw(&body).signature(&signature);
        let encoded = w.into_bytes();
        let hash = hash_bytes(&encoded);
        Unit { creator, round, parents, payload, signature, encoded, body_len, hash }
    }

    pub fn canonical_decode(bytes: &[u8]) -> Result<Unit, WireError> {
        let mut r = Reader::new(bytes);
        let creator = r.index()?;
        let np = r.count(32)?;
        let mut parents = Vec::with_capacity(np);
        for _ in 0..np {
            let d = r.digest()?;
            if parents.last().is_some_and(|last| *last >= d) {
                return Err(WireError::NonCanonical("parents not strictly ascending".into()));
            }
            parents.push(d);
        }
        let payload = Payload::decode(&mut r)?;
        let round = r.u32()?;
        let body_len = r.position();
        let signature = r.signature()?;
        r.finish()?;
        Ok(Unit {
            creator,
            round,
            parents,
            payload,
            signature,
            encoded: bytes.to_vec(),
            body_len,
            hash: hash_bytes(bytes),
        })
    }

    pub fn canonical_encode(&self) -> &[u8] {
        &self.encoded
    }

    /// Bytes covered by the signature.
    pub fn signed_bytes(&self) -> &[u8] {
        &self.encoded[..self.body_len]
    }

    pub fn verify_signature(&self, b: &GroupBackend, pk: &crate::crypto::Element) -> bool {
        schnorr::verify(b, pk, self.signed_bytes(), &self.signature)
    }

    pub fn creator(&self) -> NodeId {
        self.creator
    }

    /// Round claimed by the creator; validation checks it against the dag.
    pub fn round(&self) -> Round {
        self.round
    }

    pub fn parents(&self) -> &[Digest] {
        &self.parents
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn hash(&self) -> Digest {
        self.hash
    }

    pub fn encoded_len(&self) -> usize {
        self.encoded.len()
    }
}
