//! Untrusted aggregator behaviours and the evidence that they cannot
//! rewrite committed state.

use serde::{Deserialize, Serialize};

use super::leaf::LeafRecord;
use super::ledger::{CommittedRoot, RootLedger, Submission};
use super::tree::{batch_root, verify_inclusion, Digest, MerkleRoot, MerkleTree, RootKind};
use super::CommitmentError;
use crate::model::EpochIndex;

/// Records collected off-chain for one epoch and root kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingBatch {
    pub epoch: EpochIndex,
    pub kind: RootKind,
    pub leaves: Vec<LeafRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorBehavior {
    Honest,
    /// Drops the leaf at this index before building the root.
    OmitLeaf(usize),
    /// Re-labels the batch root with the epoch preceding the latest
    /// committed one.
    StaleRoot,
    /// Submits two different roots for the pending epoch.
    Equivocate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub root: MerkleRoot,
    pub result: Submission,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatorReport {
    pub behavior: AggregatorBehavior,
    pub submissions: Vec<SubmissionRecord>,
    /// For each leaf of the pending batch, whether some inclusion proof
    /// verifies against the root committed for the pending epoch.
    pub leaf_provable: Vec<bool>,
    pub ledger_len_before: usize,
    pub ledger_len_after: usize,
    /// Entries that existed before the step are unchanged and still form
    /// the ledger prefix.
    pub prior_entries_intact: bool,
}

impl AggregatorReport {
    pub fn accepted_count(&self) -> usize {
        self.submissions.iter().filter(|s| s.result.is_accepted()).count()
    }
}

/// Plays one aggregator move against `ledger` at model time `at_time`.
pub fn adversarial_aggregator_step(
    ledger: &mut RootLedger,
    batch: &PendingBatch,
    behavior: AggregatorBehavior,
    at_time: u64,
) -> Result<AggregatorReport, CommitmentError> {
    let before: Vec<CommittedRoot> = ledger.entries().to_vec();
    let mut submissions = Vec::new();
    let mut submit = |ledger: &mut RootLedger, root: MerkleRoot| {
        let result = ledger.submit_root(&root, at_time);
        submissions.push(SubmissionRecord { root, result });
    };

    // Tree actually built by the aggregator for the pending epoch, if any.
    let mut published: Option<Vec<LeafRecord>> = None;
    match behavior {
        AggregatorBehavior::Honest => {
            submit(ledger, batch_root(batch.kind, batch.epoch, &batch.leaves));
            published = Some(batch.leaves.clone());
        }
        AggregatorBehavior::OmitLeaf(i) => {
            if i >= batch.leaves.len() {
                return Err(CommitmentError::IndexOutOfRange { index: i, len: batch.leaves.len() });
            }
            let mut kept = batch.leaves.clone();
            kept.remove(i);
            submit(ledger, batch_root(batch.kind, batch.epoch, &kept));
            published = Some(kept);
        }
        AggregatorBehavior::StaleRoot => {
            let latest = ledger.latest(batch.kind).ok_or(CommitmentError::NoStaleTarget)?;
            let target = latest.index().checked_sub(1).ok_or(CommitmentError::NoStaleTarget)?;
            let mut root = batch_root(batch.kind, batch.epoch, &batch.leaves);
            root.epoch = EpochIndex(target);
            submit(ledger, root);
        }
        AggregatorBehavior::Equivocate => {
            let honest = batch_root(batch.kind, batch.epoch, &batch.leaves);
            let alternative_leaves: Vec<LeafRecord> = batch.leaves.iter().skip(1).cloned().collect();
            let alternative = batch_root(batch.kind, batch.epoch, &alternative_leaves);
            submit(ledger, honest);
            submit(ledger, alternative);
            if submissions[0].result.is_accepted() {
                published = Some(batch.leaves.clone());
            } else if submissions[1].result.is_accepted() {
                published = Some(alternative_leaves);
            }
        }
    }

    let committed = ledger.root_for(batch.epoch, batch.kind);
    let leaf_provable = batch
        .leaves
        .iter()
        .map(|leaf| match (&committed, &published) {
            (Some(root), Some(published)) => provable(root, leaf, published, batch),
            _ => false,
        })
        .collect();

    let after = ledger.entries();
    let prior_entries_intact = after.len() >= before.len() && after[..before.len()] == before[..];
    Ok(AggregatorReport {
        behavior,
        submissions,
        leaf_provable,
        ledger_len_before: before.len(),
        ledger_len_after: after.len(),
        prior_entries_intact,
    })
}

/// Tries every proof available to a party holding either the published
/// tree or the full pending batch.
fn provable(root: &MerkleRoot, leaf: &LeafRecord, published: &[LeafRecord], batch: &PendingBatch) -> bool {
    let candidates = [published, &batch.leaves[..]];
    candidates.iter().any(|leaves| {
        let Ok(tree) = MerkleTree::build(root.kind, root.epoch, leaves) else {
            return false;
        };
        let target: Digest = super::tree::leaf_hash(&leaf.encode());
        tree.leaf_hashes()
            .iter()
            .enumerate()
            .filter(|(_, h)| **h == target)
            .any(|(i, _)| tree.prove(i).map(|p| verify_inclusion(root, leaf, &p)).unwrap_or(false))
    })
}
