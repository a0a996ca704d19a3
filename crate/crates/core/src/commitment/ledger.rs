//! Append-only, one-root-per-epoch commitment ledger.

use serde::{Deserialize, Serialize};

use super::tree::{Digest, MerkleRoot, RootKind};
use crate::model::{EpochIndex, EPOCH_HOURS};

/// Wire size of a commitment message: version, kind, epoch, digest.
pub const COMMITMENT_MESSAGE_LEN: usize = 1 + 1 + 8 + 32;
const COMMITMENT_VERSION: u8 = 0x01;

/// The fixed-size message an aggregator submits for one root.
pub fn encode_commitment(root: &MerkleRoot) -> [u8; COMMITMENT_MESSAGE_LEN] {
    let mut out = [0u8; COMMITMENT_MESSAGE_LEN];
    out[0] = COMMITMENT_VERSION;
    out[1] = root.kind.tag();
    out[2..10].copy_from_slice(&root.epoch.index().to_be_bytes());
    out[10..].copy_from_slice(&root.digest);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerConfig {
    /// Length of the submission window that opens at the end of each epoch.
    pub window_hours: u64,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig { window_hours: EPOCH_HOURS }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommittedRoot {
    pub epoch: EpochIndex,
    pub kind: RootKind,
    #[serde(with = "crate::model::hex_bytes")]
    pub digest: Digest,
    pub submitted_at: u64,
}

impl CommittedRoot {
    pub fn as_root(&self) -> MerkleRoot {
        MerkleRoot { digest: self.digest, kind: self.kind, epoch: self.epoch }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum RejectReason {
    DuplicateEpoch,
    StaleEpoch,
    WindowClosed { opens: u64, closes: u64, at: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum Submission {
    Accepted,
    Rejected(RejectReason),
}

impl Submission {
    pub fn is_accepted(self) -> bool {
        matches!(self, Submission::Accepted)
    }
}

/// Committed roots in submission order. TxRoot and CreditRoot share the
/// submission window but are accepted independently.
///
/// Single writer: callers serialise `submit_root`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RootLedger {
    config: LedgerConfig,
    entries: Vec<CommittedRoot>,
}

impl RootLedger {
    pub fn new(config: LedgerConfig) -> Self {
        RootLedger { config, entries: Vec::new() }
    }

    pub fn config(&self) -> LedgerConfig {
        self.config
    }

    pub fn entries(&self) -> &[CommittedRoot] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Half-open window `[opens, closes)` during which roots for `epoch`
    /// may be submitted.
    pub fn window(&self, epoch: EpochIndex) -> (u64, u64) {
        let opens = epoch.end_hour();
        (opens, opens + self.config.window_hours)
    }

    pub fn latest(&self, kind: RootKind) -> Option<EpochIndex> {
        self.entries.iter().rev().find(|e| e.kind == kind).map(|e| e.epoch)
    }

    pub fn root_for(&self, epoch: EpochIndex, kind: RootKind) -> Option<MerkleRoot> {
        self.entries.iter().find(|e| e.epoch == epoch && e.kind == kind).map(CommittedRoot::as_root)
    }

    /// Accepts a root only for an epoch later than the last committed one
    /// of the same kind, and only inside that epoch's submission window.
    /// Rejections leave the ledger untouched.
    pub fn submit_root(&mut self, root: &MerkleRoot, at_time: u64) -> Submission {
        if let Some(latest) = self.latest(root.kind) {
            if root.epoch < latest {
                return Submission::Rejected(RejectReason::StaleEpoch);
            }
            if root.epoch == latest {
                return Submission::Rejected(RejectReason::DuplicateEpoch);
            }
        }
        let (opens, closes) = self.window(root.epoch);
        if at_time < opens || at_time >= closes {
            return Submission::Rejected(RejectReason::WindowClosed { opens, closes, at: at_time });
        }
        self.entries.push(CommittedRoot {
            epoch: root.epoch,
            kind: root.kind,
            digest: root.digest,
            submitted_at: at_time,
        });
        Submission::Accepted
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn root(epoch: u64, kind: RootKind, fill: u8) -> MerkleRoot {
        MerkleRoot { digest: [fill; 32], kind, epoch: EpochIndex(epoch) }
    }

    fn at(epoch: u64) -> u64 {
        EpochIndex(epoch).end_hour()
    }

    #[test]
    fn duplicate_and_stale() {
        let mut l = RootLedger::default();
        for e in 0..=3 {
            assert_eq!(l.submit_root(&root(e, RootKind::TxRoot, 1), at(e)), Submission::Accepted);
        }
        assert_eq!(
            l.submit_root(&root(3, RootKind::TxRoot, 2), at(3)),
            Submission::Rejected(RejectReason::DuplicateEpoch)
        );
        assert_eq!(l.submit_root(&root(2, RootKind::TxRoot, 2), at(3)), Submission::Rejected(RejectReason::StaleEpoch));
        assert_eq!(l.len(), 4);
    }

    #[test]
    fn window_bounds() {
        let mut l = RootLedger::default();
        let r = root(0, RootKind::TxRoot, 1);
        assert_eq!(
            l.submit_root(&r, 3),
            Submission::Rejected(RejectReason::WindowClosed { opens: 4, closes: 8, at: 3 })
        );
        assert_eq!(
            l.submit_root(&r, 8),
            Submission::Rejected(RejectReason::WindowClosed { opens: 4, closes: 8, at: 8 })
        );
        assert!(l.is_empty());
        assert_eq!(l.submit_root(&r, 7), Submission::Accepted);
    }

    #[test]
    fn kinds_are_independent() {
        let mut l = RootLedger::default();
        assert!(l.submit_root(&root(0, RootKind::TxRoot, 1), 4).is_accepted());
        assert!(l.submit_root(&root(0, RootKind::CreditRoot, 1), 4).is_accepted());
        assert_eq!(l.root_for(EpochIndex(0), RootKind::CreditRoot).unwrap().digest, [1; 32]);
    }

    #[test]
    fn missed_epochs_may_be_skipped() {
        let mut l = RootLedger::default();
        assert!(l.submit_root(&root(0, RootKind::TxRoot, 1), at(0)).is_accepted());
        assert!(l.submit_root(&root(2, RootKind::TxRoot, 1), at(2)).is_accepted());
        assert_eq!(l.submit_root(&root(1, RootKind::TxRoot, 1), at(2)), Submission::Rejected(RejectReason::StaleEpoch));
    }

    #[test]
    fn message_size_is_constant() {
        let a = encode_commitment(&root(0, RootKind::TxRoot, 1));
        let b = encode_commitment(&root(u64::MAX, RootKind::CreditRoot, 9));
        assert_eq!(a.len(), b.len());
        assert_eq!(a.len(), 42);
    }
}
