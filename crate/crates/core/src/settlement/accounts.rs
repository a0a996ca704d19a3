use serde::{Deserialize, Serialize};

use super::{PenaltyPhase, SettlementConfig, SettlementError};
use crate::model::{AgentId, EpochIndex, Role};
use crate::money::{Amount, Ratio};

/// Per-epoch reward and credit terms of a buyer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuyerTerms {
    pub tx_rebate: Amount,
    pub stake_reward: Amount,
    pub credit_reward: Amount,
    pub credit_penalty: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuyerAccount {
    pub id: AgentId,
    pub wallet: Amount,
    pub stake: Amount,
    pub credit_limit: Amount,
    pub used_credit: Amount,
    pub trust: u32,
    pub phase: PenaltyPhase,
    pub alive: bool,
    /// Misuse flags raised since the last settlement.
    pub misuse_flags: u32,
    pub terms: BuyerTerms,
}

impl BuyerAccount {
    pub fn new(id: AgentId, wallet: Amount, stake: Amount, credit_limit: Amount, terms: BuyerTerms) -> Self {
        BuyerAccount {
            id,
            wallet,
            stake,
            credit_limit,
            used_credit: Amount::ZERO,
            trust: 0,
            phase: PenaltyPhase::Normal,
            alive: true,
            misuse_flags: 0,
            terms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerchantAccount {
    pub id: AgentId,
    pub wallet: Amount,
    pub stake: Amount,
    pub stake_reward: Amount,
    pub trust: u32,
    pub phase: PenaltyPhase,
    pub alive: bool,
}

impl MerchantAccount {
    pub fn new(id: AgentId, wallet: Amount, stake: Amount, stake_reward: Amount) -> Self {
        MerchantAccount { id, wallet, stake, stake_reward, trust: 0, phase: PenaltyPhase::Normal, alive: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuarantorAccount {
    pub id: AgentId,
    pub wallet: Amount,
    /// Stake locked behind open auction commitments.
    pub locked: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementState {
    pub config: SettlementConfig,
    /// Next epoch to be settled.
    pub next_epoch: EpochIndex,
    pub buyers: Vec<BuyerAccount>,
    pub merchants: Vec<MerchantAccount>,
    pub guarantors: Vec<GuarantorAccount>,
    pub penalty_pool: Amount,
    pub reward_pool: Amount,
}

impl SettlementState {
    pub fn new(config: SettlementConfig, reward_pool: Amount) -> Self {
        SettlementState {
            config,
            next_epoch: EpochIndex(0),
            buyers: Vec::new(),
            merchants: Vec::new(),
            guarantors: Vec::new(),
            penalty_pool: Amount::ZERO,
            reward_pool,
        }
    }

    pub fn buyer(&self, id: &AgentId) -> Option<&BuyerAccount> {
        self.buyers.iter().find(|b| b.id == *id)
    }

    pub fn buyer_mut(&mut self, id: &AgentId) -> Result<&mut BuyerAccount, SettlementError> {
        self.buyers.iter_mut().find(|b| b.id == *id).ok_or(SettlementError::UnknownAgent(*id))
    }

    pub fn merchant(&self, id: &AgentId) -> Option<&MerchantAccount> {
        self.merchants.iter().find(|m| m.id == *id)
    }

    pub fn merchant_mut(&mut self, id: &AgentId) -> Result<&mut MerchantAccount, SettlementError> {
        self.merchants.iter_mut().find(|m| m.id == *id).ok_or(SettlementError::UnknownAgent(*id))
    }

    pub fn guarantor(&self, id: &AgentId) -> Option<&GuarantorAccount> {
        self.guarantors.iter().find(|g| g.id == *id)
    }

    pub fn guarantor_mut(&mut self, id: &AgentId) -> Result<&mut GuarantorAccount, SettlementError> {
        self.guarantors.iter_mut().find(|g| g.id == *id).ok_or(SettlementError::UnknownAgent(*id))
    }

    pub fn is_alive(&self, id: &AgentId) -> bool {
        match id.role {
            Role::Buyer => self.buyer(id).is_some_and(|b| b.alive),
            Role::Merchant => self.merchant(id).is_some_and(|m| m.alive),
            Role::Guarantor => self.guarantor(id).is_some(),
        }
    }

    /// Moves guarantor funds from wallet into the auction lock.
    pub fn lock_guarantor_stake(&mut self, id: &AgentId, amount: Amount) -> Result<(), SettlementError> {
        let g = self.guarantor_mut(id)?;
        if g.wallet < amount {
            return Err(SettlementError::InsufficientFunds { agent: *id, needed: amount });
        }
        g.wallet = g.wallet.checked_sub(amount)?;
        g.locked = g.locked.checked_add(amount)?;
        Ok(())
    }

    /// Sum of every balance in the system, in micro-units.
    pub fn total_value(&self) -> i128 {
        let b: i128 = self.buyers.iter().map(|b| b.wallet.micros() as i128 + b.stake.micros() as i128).sum();
        let m: i128 = self.merchants.iter().map(|m| m.wallet.micros() as i128 + m.stake.micros() as i128).sum();
        let g: i128 = self.guarantors.iter().map(|g| g.wallet.micros() as i128 + g.locked.micros() as i128).sum();
        b + m + g + self.penalty_pool.micros() as i128 + self.reward_pool.micros() as i128
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Authorization {
    Approved,
    /// Exceeds the limit by `deficit` but stays inside the risk bound; the
    /// deficit is routed to an over-limit auction.
    OverLimit(Amount),
    /// Exceeds the risk bound; a misuse flag was raised.
    RejectedMisuse,
}

/// Checks a payment request against the remaining credit.
///
/// An approved payment consumes credit. An over-limit request consumes the
/// rest of the limit and leaves the deficit to outside funding. A rejected
/// request consumes nothing.
pub fn authorize_payment(
    account: &mut BuyerAccount,
    amount: Amount,
    risk_bound: &Ratio,
) -> Result<Authorization, SettlementError> {
    if !account.alive {
        return Err(SettlementError::AgentNotAlive(account.id));
    }
    let total = account.used_credit.checked_add(amount)?;
    if total <= account.credit_limit {
        account.used_credit = total;
        return Ok(Authorization::Approved);
    }
    let deficit = total.checked_sub(account.credit_limit)?;
    let allowed = risk_bound * &account.credit_limit.to_ratio();
    if deficit.to_ratio() <= allowed {
        account.used_credit = account.credit_limit;
        Ok(Authorization::OverLimit(deficit))
    } else {
        account.misuse_flags += 1;
        Ok(Authorization::RejectedMisuse)
    }
}
