//! Commitment cost model.
//!
//! Builds synthetic batches, commits their roots and measures the bytes
//! that stay off-chain (encoded leaves, proofs) against the bytes that
//! are submitted on-chain (one fixed-size message per root). Published
//! gas figures for a deployed prototype are carried alongside as static
//! reference data; they are reported, not measured here.

use serde::{Deserialize, Serialize};

use crate::commitment::{
    batch_root, encode_commitment, CommitmentError, CreditRecord, LeafRecord, MerkleTree, RootKind,
    COMMITMENT_MESSAGE_LEN,
};
use crate::model::{AgentId, EpochIndex, Role, Transaction};
use crate::money::Amount;

/// Roots committed per epoch: one transaction root and one credit root.
pub const ROOTS_PER_EPOCH: usize = 2;

/// Gas figures reported for a deployed prototype at a given batch size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceGas {
    pub batch_size: usize,
    pub tx_root_gas: u64,
    pub credit_root_gas: u64,
    /// Submitting every transfer directly.
    pub direct_gas: u64,
    /// Steady-state batched settlement.
    pub batched_gas: u64,
    /// Savings of batched over direct, in hundredths of a percent.
    pub savings_bp: u32,
}

pub const REFERENCE_GAS: [ReferenceGas; 5] = [
    ReferenceGas {
        batch_size: 100,
        tx_root_gas: 21_892,
        credit_root_gas: 21_892,
        direct_gas: 5_863_758,
        batched_gas: 106_274,
        savings_bp: 9_819,
    },
    ReferenceGas {
        batch_size: 200,
        tx_root_gas: 21_892,
        credit_root_gas: 21_892,
        direct_gas: 11_696_824,
        batched_gas: 106_274,
        savings_bp: 9_909,
    },
    ReferenceGas {
        batch_size: 300,
        tx_root_gas: 21_880,
        credit_root_gas: 21_892,
        direct_gas: 17_532_352,
        batched_gas: 106_274,
        savings_bp: 9_939,
    },
    ReferenceGas {
        batch_size: 400,
        tx_root_gas: 21_892,
        credit_root_gas: 21_892,
        direct_gas: 23_287_671,
        batched_gas: 106_262,
        savings_bp: 9_954,
    },
    ReferenceGas {
        batch_size: 500,
        tx_root_gas: 21_892,
        credit_root_gas: 21_892,
        direct_gas: 29_735_785,
        batched_gas: 106_274,
        savings_bp: 9_964,
    },
];

pub fn reference_gas(batch_size: usize) -> Option<ReferenceGas> {
    REFERENCE_GAS.iter().copied().find(|r| r.batch_size == batch_size)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRow {
    pub batch_size: usize,
    /// Encoded leaves aggregated off-chain.
    pub offchain_leaf_bytes: usize,
    /// Sibling hashes in the longest inclusion proof.
    pub max_proof_len: usize,
    pub commitment_messages: usize,
    pub commitment_bytes: usize,
    pub sentinel_root: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceGas>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModelReport {
    pub message_len: usize,
    pub rows: Vec<CostRow>,
}

fn synthetic_batch(size: usize, epoch: EpochIndex) -> Vec<LeafRecord> {
    let buyer = AgentId::derive(Role::Buyer, "costmodel-buyer");
    let merchant = AgentId::derive(Role::Merchant, "costmodel-merchant");
    (0..size)
        .map(|i| {
            let mut id = [0u8; 32];
            id[24..].copy_from_slice(&(i as u64).to_be_bytes());
            let tx = Transaction::new(id, buyer, merchant, Amount::units(1), Amount::units(1), epoch)
                .expect("synthetic transaction is valid");
            LeafRecord::Tx(tx)
        })
        .collect()
}

pub fn cost_row(batch_size: usize) -> Result<CostRow, CommitmentError> {
    let epoch = EpochIndex(0);
    let leaves = synthetic_batch(batch_size, epoch);
    let offchain_leaf_bytes = leaves.iter().map(|l| l.encode().len()).sum();
    let (tx_root, max_proof_len) = if leaves.is_empty() {
        (batch_root(RootKind::TxRoot, epoch, &leaves), 0)
    } else {
        let tree = MerkleTree::build(RootKind::TxRoot, epoch, &leaves)?;
        let longest =
            (0..tree.len()).map(|i| tree.prove(i).map(|p| p.siblings.len())).try_fold(0, |m, l| l.map(|l| m.max(l)))?;
        (tree.root(), longest)
    };
    let credit = [LeafRecord::Credit(CreditRecord {
        agent: AgentId::derive(Role::Buyer, "costmodel-buyer"),
        remaining: Amount::units(1),
        epoch,
    })];
    let credit_root = batch_root(RootKind::CreditRoot, epoch, &credit);
    let messages = [encode_commitment(&tx_root), encode_commitment(&credit_root)];
    Ok(CostRow {
        batch_size,
        offchain_leaf_bytes,
        max_proof_len,
        commitment_messages: messages.len(),
        commitment_bytes: messages.iter().map(|m| m.len()).sum(),
        sentinel_root: tx_root.is_sentinel(),
        reference: reference_gas(batch_size),
    })
}

pub fn cost_model(batch_sizes: &[usize]) -> Result<CostModelReport, CommitmentError> {
    Ok(CostModelReport {
        message_len: COMMITMENT_MESSAGE_LEN,
        rows: batch_sizes.iter().map(|&n| cost_row(n)).collect::<Result<_, _>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commitment::TX_LEAF_LEN;

    #[test]
    fn commitment_cost_is_flat() {
        let r = cost_model(&[0, 1, 100, 500]).unwrap();
        for row in &r.rows {
            assert_eq!(row.commitment_messages, ROOTS_PER_EPOCH);
            assert_eq!(row.commitment_bytes, ROOTS_PER_EPOCH * COMMITMENT_MESSAGE_LEN);
            assert_eq!(row.offchain_leaf_bytes, row.batch_size * TX_LEAF_LEN);
        }
        assert!(r.rows[0].sentinel_root);
        assert_eq!(r.rows[3].max_proof_len, 9);
        assert_eq!(r.rows[2].reference.unwrap().tx_root_gas, 21_892);
    }
}
