//! Quick dissemination: multicast of compact units, random gossip, fork
//! alerts with chain commitments.

pub mod alert;
pub mod compact;
pub mod gossip;

pub use alert::{is_fork_proof, AlertBook, AlertError, AlertMessage};
pub use compact::{control_hash, encode_parents, resolve_parents, CompactParents, CompactUnit, Resolved};
pub use gossip::{peer_has_more, units_peer_lacks, AntiSpam, ConciseInfo, CreatorTop};
