//! Canonical byte encoding of committed leaves.
//!
//! Layout (all integers big-endian, fixed width):
//!
//! ```text
//! transaction leaf (122 bytes)
//!   0      version        u8  = 0x01
//!   1      kind           u8  = 0x01
//!   2..34  tx id          [u8; 32]
//!   34..66 buyer id       [u8; 32]
//!   66..98 merchant id    [u8; 32]
//!   98..106  payment      i64 micro-units
//!   106..114 service value i64 micro-units
//!   114..122 epoch        u64
//!
//! credit leaf (51 bytes)
//!   0      version        u8  = 0x01
//!   1      kind           u8  = 0x02
//!   2..34  agent id       [u8; 32]
//!   34     agent role     u8  (1 buyer, 2 merchant, 3 guarantor)
//!   35..43 remaining credit i64 micro-units
//!   43..51 epoch          u64
//! ```

use serde::{Deserialize, Serialize};

use super::CommitmentError;
use crate::model::{AgentId, EpochIndex, Role, Transaction};
use crate::money::Amount;

pub const LEAF_VERSION: u8 = 0x01;
pub const KIND_TX: u8 = 0x01;
pub const KIND_CREDIT: u8 = 0x02;
pub const TX_LEAF_LEN: usize = 122;
pub const CREDIT_LEAF_LEN: usize = 51;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CreditRecord {
    pub agent: AgentId,
    pub remaining: Amount,
    pub epoch: EpochIndex,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LeafRecord {
    Tx(Transaction),
    Credit(CreditRecord),
}

impl LeafRecord {
    pub fn epoch(&self) -> EpochIndex {
        match self {
            LeafRecord::Tx(tx) => tx.epoch,
            LeafRecord::Credit(c) => c.epoch,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            LeafRecord::Tx(tx) => {
                let mut out = Vec::with_capacity(TX_LEAF_LEN);
                out.push(LEAF_VERSION);
                out.push(KIND_TX);
                out.extend_from_slice(&tx.id);
                out.extend_from_slice(&tx.buyer.bytes);
                out.extend_from_slice(&tx.merchant.bytes);
                out.extend_from_slice(&tx.payment.micros().to_be_bytes());
                out.extend_from_slice(&tx.service_value.micros().to_be_bytes());
                out.extend_from_slice(&tx.epoch.index().to_be_bytes());
                out
            }
            LeafRecord::Credit(c) => {
                let mut out = Vec::with_capacity(CREDIT_LEAF_LEN);
                out.push(LEAF_VERSION);
                out.push(KIND_CREDIT);
                out.extend_from_slice(&c.agent.bytes);
                out.push(c.agent.role.tag());
                out.extend_from_slice(&c.remaining.micros().to_be_bytes());
                out.extend_from_slice(&c.epoch.index().to_be_bytes());
                out
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CommitmentError> {
        let bad = |why: &str| CommitmentError::MalformedLeaf(why.to_string());
        if bytes.len() < 2 {
            return Err(bad("truncated header"));
        }
        if bytes[0] != LEAF_VERSION {
            return Err(bad("unknown version"));
        }
        let arr32 = |s: &[u8]| -> [u8; 32] { s.try_into().expect("slice length checked") };
        let i64_at = |s: &[u8]| i64::from_be_bytes(s.try_into().expect("slice length checked"));
        let u64_at = |s: &[u8]| u64::from_be_bytes(s.try_into().expect("slice length checked"));
        match bytes[1] {
            KIND_TX => {
                if bytes.len() != TX_LEAF_LEN {
                    return Err(bad("bad transaction leaf length"));
                }
                Ok(LeafRecord::Tx(Transaction {
                    id: arr32(&bytes[2..34]),
                    buyer: AgentId::new(arr32(&bytes[34..66]), Role::Buyer),
                    merchant: AgentId::new(arr32(&bytes[66..98]), Role::Merchant),
                    payment: Amount::from_micros(i64_at(&bytes[98..106])),
                    service_value: Amount::from_micros(i64_at(&bytes[106..114])),
                    epoch: EpochIndex(u64_at(&bytes[114..122])),
                }))
            }
            KIND_CREDIT => {
                if bytes.len() != CREDIT_LEAF_LEN {
                    return Err(bad("bad credit leaf length"));
                }
                let role = match bytes[34] {
                    1 => Role::Buyer,
                    2 => Role::Merchant,
                    3 => Role::Guarantor,
                    _ => return Err(bad("unknown role")),
                };
                Ok(LeafRecord::Credit(CreditRecord {
                    agent: AgentId::new(arr32(&bytes[2..34]), role),
                    remaining: Amount::from_micros(i64_at(&bytes[35..43])),
                    epoch: EpochIndex(u64_at(&bytes[43..51])),
                }))
            }
            _ => Err(bad("unknown kind")),
        }
    }
}
