use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{SimError, Strategy};
use crate::incentives::{BuyerParams, MerchantParams};
use crate::model::{AgentId, Role};
use crate::money::{Amount, Rate, Ratio};
use crate::settlement::SettlementConfig;

pub const SCENARIO_VERSION: u32 = 1;

/// How a buyer's stage payoff in a default epoch is valued.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultPayoff {
    /// The default row of the buyer stage utility.
    #[default]
    StageUtility,
    /// Conforming utility plus the full uncollateralized exposure
    /// `v_max - S`.
    WorstCaseExposure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuyerEntry {
    pub name: String,
    pub merchant: String,
    pub wallet: Amount,
    pub params: BuyerParams,
    #[serde(default)]
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MerchantEntry {
    pub name: String,
    pub wallet: Amount,
    pub stake: Amount,
    /// Rows follow the concatenated transaction lists of this merchant's
    /// buyers, in roster order.
    pub params: MerchantParams,
    #[serde(default)]
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuarantorEntry {
    pub name: String,
    pub wallet: Amount,
    /// Rate the guarantor bids; its true funding cost.
    pub rate: Rate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionTerms {
    pub cap: Rate,
    pub required_stake: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub horizon: u64,
    pub discount: Ratio,
    #[serde(default)]
    pub settlement: SettlementConfig,
    pub reward_pool: Amount,
    #[serde(default)]
    pub default_payoff: DefaultPayoff,
    pub buyers: Vec<BuyerEntry>,
    pub merchants: Vec<MerchantEntry>,
    #[serde(default)]
    pub guarantors: Vec<GuarantorEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auction: Option<AuctionTerms>,
}

impl ScenarioConfig {
    pub fn buyer_id(entry: &BuyerEntry) -> AgentId {
        AgentId::derive(Role::Buyer, &entry.name)
    }

    pub fn merchant_id(entry: &MerchantEntry) -> AgentId {
        AgentId::derive(Role::Merchant, &entry.name)
    }

    pub fn guarantor_id(entry: &GuarantorEntry) -> AgentId {
        AgentId::derive(Role::Guarantor, &entry.name)
    }

    pub fn merchant_index(&self, name: &str) -> Option<usize> {
        self.merchants.iter().position(|m| m.name == name)
    }

    /// Buyer indices served by merchant `mi`, in roster order.
    pub fn buyers_of(&self, mi: usize) -> impl Iterator<Item = usize> + '_ {
        let name = &self.merchants[mi].name;
        self.buyers.iter().enumerate().filter(move |(_, b)| &b.merchant == name).map(|(i, _)| i)
    }

    /// Offset of buyer `bi`'s first transaction in its merchant's rows.
    pub fn row_offset(&self, bi: usize) -> usize {
        let merchant = &self.buyers[bi].merchant;
        self.buyers[..bi].iter().filter(|b| &b.merchant == merchant).map(|b| b.params.transactions.len()).sum()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.version != SCENARIO_VERSION {
            return bad(format!("unsupported version {}, expected {SCENARIO_VERSION}", self.version));
        }
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if self.discount.is_negative() || self.discount >= Ratio::one() {
            return bad(format!("discount {} outside [0, 1)", self.discount));
        }
        if self.settlement.risk_bound.is_negative() {
            return bad("risk_bound must be non-negative".into());
        }
        let mut names = BTreeSet::new();
        for n in self.buyers.iter().map(|b| &b.name).chain(self.merchants.iter().map(|m| &m.name)) {
            if !names.insert(("trader", n)) {
                return bad(format!("duplicate agent name {n:?}"));
            }
        }
        for g in &self.guarantors {
            if !names.insert(("guarantor", &g.name)) {
                return bad(format!("duplicate guarantor name {:?}", g.name));
            }
        }
        for b in &self.buyers {
            if self.merchant_index(&b.merchant).is_none() {
                return bad(format!("buyer {:?} names unknown merchant {:?}", b.name, b.merchant));
            }
            b.params.validate().map_err(|e| SimError::InvalidConfig(format!("buyer {:?}: {e}", b.name)))?;
            if b.params.stake.is_negative() || b.params.credit_limit.is_negative() {
                return bad(format!("buyer {:?}: stake and credit limit must be non-negative", b.name));
            }
            for (k, t) in b.params.transactions.iter().enumerate() {
                if t.payment <= Amount::ZERO {
                    return bad(format!("buyer {:?} transaction {k}: payment must be positive", b.name));
                }
            }
        }
        for (mi, m) in self.merchants.iter().enumerate() {
            let payments: Vec<Amount> = self
                .buyers_of(mi)
                .flat_map(|bi| self.buyers[bi].params.transactions.iter().map(|t| t.payment))
                .collect();
            if payments.len() != m.params.transactions.len() {
                return bad(format!(
                    "merchant {:?} has {} transaction rows, its buyers submit {}",
                    m.name,
                    m.params.transactions.len(),
                    payments.len()
                ));
            }
            for (k, (row, p)) in m.params.transactions.iter().zip(&payments).enumerate() {
                if row.payment != *p {
                    return bad(format!("merchant {:?} row {k}: payment {} != buyer payment {p}", m.name, row.payment));
                }
            }
        }
        Ok(())
    }
}
