//! Epoch settlement state machine.
//!
//! Credit is authorized and consumed during an epoch; every incentive
//! effect (rewards, penalties, credit and trust updates, phase changes) is
//! applied in one step at the epoch boundary by [`settle_epoch`], which is
//! a pure function of the prior state, the agents' actions and the
//! transactions proven against the committed roots.

mod accounts;
mod epoch;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AgentId, Conduct, EpochIndex};
use crate::money::{Amount, ArithmeticError, Ratio};

pub use accounts::{
    authorize_payment, Authorization, BuyerAccount, BuyerTerms, GuarantorAccount, MerchantAccount, SettlementState,
};
pub use epoch::{settle_epoch, AgentOutcome, BalanceDelta, EpochInput, EpochSettlement, ProvenTx, TxTerms, ValueFlows};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SettlementError {
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("agent {0} has defaulted and is no longer active")]
    AgentNotAlive(AgentId),
    #[error("agent {0} has transactions this epoch but no action")]
    MissingAction(AgentId),
    #[error("action for agent {0} given twice")]
    DuplicateAction(AgentId),
    #[error("action does not match the role of agent {0}")]
    RoleMismatch(AgentId),
    #[error("transaction {} has no valid inclusion proof against the committed root", hex::encode(.0))]
    UnprovenTransaction([u8; 32]),
    #[error("expected to settle {expected}, got {got}")]
    EpochOutOfOrder { expected: EpochIndex, got: EpochIndex },
    #[error("agent {agent} cannot cover {needed}")]
    InsufficientFunds { agent: AgentId, needed: Amount },
    #[error("reward pool cannot cover {needed}")]
    RewardPoolExhausted { needed: Amount },
    #[error("guarantor {0} has less locked stake than the auction reports")]
    LockMismatch(AgentId),
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SettlementConfig {
    pub punishment_epochs: u32,
    pub recovery_levels: u32,
    pub trust_max: u32,
    /// Share of the credit limit that may be exceeded through the
    /// over-limit auction.
    pub risk_bound: Ratio,
    pub credit_floor: Amount,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub credit_cap: Option<Amount>,
}

impl Default for SettlementConfig {
    fn default() -> Self {
        SettlementConfig {
            punishment_epochs: 3,
            recovery_levels: 3,
            trust_max: 100,
            risk_bound: Ratio::new(1, 4).expect("non-zero denominator"),
            credit_floor: Amount::ZERO,
            credit_cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyPhase {
    Normal,
    /// Rewards suspended for the remaining number of epochs.
    Punishment(u32),
    Recovery(u32),
}

impl PenaltyPhase {
    pub fn is_punished(self) -> bool {
        matches!(self, PenaltyPhase::Punishment(_))
    }
}

pub fn step_phase(phase: PenaltyPhase, conformed: bool, config: &SettlementConfig) -> PenaltyPhase {
    let punish = || {
        if config.punishment_epochs == 0 {
            PenaltyPhase::Recovery(0)
        } else {
            PenaltyPhase::Punishment(config.punishment_epochs)
        }
    };
    if !conformed {
        return punish();
    }
    match phase {
        PenaltyPhase::Normal => PenaltyPhase::Normal,
        PenaltyPhase::Punishment(k) if k > 1 => PenaltyPhase::Punishment(k - 1),
        PenaltyPhase::Punishment(_) => PenaltyPhase::Recovery(0),
        PenaltyPhase::Recovery(l) if l < config.recovery_levels => PenaltyPhase::Recovery(l + 1),
        PenaltyPhase::Recovery(_) => PenaltyPhase::Normal,
    }
}

/// Additive credit rule: grow by `reward` on conforming, shrink by
/// `penalty` on late repayment, clear on default.
pub fn credit_update(
    limit: Amount,
    conduct: Conduct,
    reward: Amount,
    penalty: Amount,
    config: &SettlementConfig,
) -> Result<Amount, ArithmeticError> {
    Ok(match conduct {
        Conduct::Conform => {
            let grown = limit.checked_add(reward)?;
            match config.credit_cap {
                Some(cap) => grown.min(cap.max(limit)),
                None => grown,
            }
        }
        Conduct::Late => limit.checked_sub(penalty)?.max(config.credit_floor.max(Amount::ZERO)).min(limit),
        Conduct::Default => Amount::ZERO,
    })
}

pub(crate) fn trust_step(trust: u32, conduct: Conduct, phase: PenaltyPhase, config: &SettlementConfig) -> u32 {
    match conduct {
        Conduct::Conform if phase.is_punished() => trust,
        Conduct::Conform => trust.saturating_add(1).min(config.trust_max),
        Conduct::Late => trust.saturating_sub(1),
        Conduct::Default => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_steps() {
        let c = SettlementConfig::default();
        assert_eq!(step_phase(PenaltyPhase::Punishment(1), true, &c), PenaltyPhase::Recovery(0));
        assert_eq!(step_phase(PenaltyPhase::Punishment(3), true, &c), PenaltyPhase::Punishment(2));
        assert_eq!(step_phase(PenaltyPhase::Recovery(2), false, &c), PenaltyPhase::Punishment(3));
        assert_eq!(step_phase(PenaltyPhase::Recovery(3), true, &c), PenaltyPhase::Normal);
        assert_eq!(step_phase(PenaltyPhase::Normal, true, &c), PenaltyPhase::Normal);
        let none = SettlementConfig { punishment_epochs: 0, ..c };
        assert_eq!(step_phase(PenaltyPhase::Normal, false, &none), PenaltyPhase::Recovery(0));
    }

    /// Every state reached from Normal returns to Normal after enough
    /// conforming epochs, and one deviation always lands in the same state.
    #[test]
    fn phase_machine_exhaustive() {
        for t in 0..5 {
            for r in 0..5 {
                let c = SettlementConfig { punishment_epochs: t, recovery_levels: r, ..Default::default() };
                let mut states = vec![PenaltyPhase::Normal];
                states.extend((1..=t).map(PenaltyPhase::Punishment));
                states.extend((0..=r).map(PenaltyPhase::Recovery));
                let reset = step_phase(PenaltyPhase::Normal, false, &c);
                for s in states {
                    assert_eq!(step_phase(s, false, &c), reset);
                    let mut cur = s;
                    let mut steps = 0;
                    while cur != PenaltyPhase::Normal {
                        cur = step_phase(cur, true, &c);
                        steps += 1;
                        assert!(steps <= t + r + 1, "{s:?} does not return to normal");
                    }
                }
            }
        }
    }

    #[test]
    fn credit_rules() {
        let c = SettlementConfig { credit_cap: Some(Amount::units(120)), ..Default::default() };
        let u = Amount::units;
        assert_eq!(credit_update(u(100), Conduct::Conform, u(4), u(4), &c).unwrap(), u(104));
        assert_eq!(credit_update(u(118), Conduct::Conform, u(4), u(4), &c).unwrap(), u(120));
        assert_eq!(credit_update(u(3), Conduct::Late, u(4), u(4), &c).unwrap(), u(0));
        assert_eq!(credit_update(u(100), Conduct::Default, u(4), u(4), &c).unwrap(), u(0));
    }

    #[test]
    fn trust_is_bounded() {
        let c = SettlementConfig { trust_max: 2, ..Default::default() };
        assert_eq!(trust_step(2, Conduct::Conform, PenaltyPhase::Normal, &c), 2);
        assert_eq!(trust_step(0, Conduct::Late, PenaltyPhase::Normal, &c), 0);
        assert_eq!(trust_step(1, Conduct::Conform, PenaltyPhase::Punishment(2), &c), 1);
    }
}
