//! Batch aggregation and epoch-level state commitment.
//!
//! Records of an epoch are hashed into a Merkle tree whose root is
//! submitted to an append-only [`RootLedger`]. A record only has protocol
//! effect when it comes with an [`InclusionProof`] that verifies against
//! the committed root of its epoch.

mod adversary;
mod leaf;
mod ledger;
mod tree;

use thiserror::Error;

pub use adversary::{
    adversarial_aggregator_step, AggregatorBehavior, AggregatorReport, PendingBatch, SubmissionRecord,
};
pub use leaf::{CreditRecord, LeafRecord, CREDIT_LEAF_LEN, TX_LEAF_LEN};
pub use ledger::{
    encode_commitment, CommittedRoot, LedgerConfig, RejectReason, RootLedger, Submission, COMMITMENT_MESSAGE_LEN,
};
pub use tree::{
    batch_root, empty_root_digest, leaf_hash, node_hash, verify_inclusion, Digest, InclusionProof, MerkleRoot,
    MerkleTree, RootKind,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommitmentError {
    #[error("cannot build a Merkle tree from an empty batch")]
    EmptyBatch,
    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("malformed leaf encoding: {0}")]
    MalformedLeaf(String),
    #[error("no committed epoch precedes the latest one")]
    NoStaleTarget,
}
