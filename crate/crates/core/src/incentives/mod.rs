//! Exact evaluation of stage utilities and incentive conditions.
//!
//! All utilities and margins are exact rationals measured in whole units
//! of money. A strict inequality holds iff its margin is positive, a weak
//! one iff its margin is non-negative; a zero margin on a strict condition
//! is reported as a boundary failure.

mod buyer;
mod merchant;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::{ArithmeticError, Ratio};

pub use buyer::{
    buyer_utilities, check_buyer_conditions, default_deviation_gain, delta_threshold, verify_buyer_ppe, BuyerParams,
    BuyerTx, DeltaThreshold,
};
pub use merchant::{
    check_merchant_conditions, discounted_loss, merchant_utilities, suspension_loss, verify_merchant_ppe,
    MerchantParams, MerchantTx, SuspensionLoss,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IncentiveError {
    #[error("discount factor {0} outside [0, 1)")]
    DiscountOutOfRange(Ratio),
    #[error("no continuation value can deter default (threshold would be 1)")]
    NoDeterrence,
    #[error("conversion factor must be non-negative, got {0}")]
    NegativeConversion(Ratio),
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
}

pub(crate) fn check_discount(delta: &Ratio) -> Result<(), IncentiveError> {
    if delta.is_negative() || *delta >= Ratio::one() {
        Err(IncentiveError::DiscountOutOfRange(delta.clone()))
    } else {
        Ok(())
    }
}

/// Utilities of the three stage actions, in units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageUtilities {
    pub conform: Ratio,
    pub late: Ratio,
    pub default: Ratio,
}

impl StageUtilities {
    pub fn get(&self, conduct: crate::model::Conduct) -> &Ratio {
        match conduct {
            crate::model::Conduct::Conform => &self.conform,
            crate::model::Conduct::Late => &self.late,
            crate::model::Conduct::Default => &self.default,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    TimelyDeliveryDominance,
    BoundedLiability,
    SettlementLiveness,
    MerchantStrictOrdering,
    MerchantParticipation,
    TimelyRepaymentDominance,
    BoundedExposure,
    DefaultDeterrence,
    BuyerStrategyOrdering,
    BuyerParticipation,
}

impl ConditionId {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionId::TimelyDeliveryDominance => "timely_delivery_dominance",
            ConditionId::BoundedLiability => "bounded_liability",
            ConditionId::SettlementLiveness => "settlement_liveness",
            ConditionId::MerchantStrictOrdering => "merchant_strict_ordering",
            ConditionId::MerchantParticipation => "merchant_participation",
            ConditionId::TimelyRepaymentDominance => "timely_repayment_dominance",
            ConditionId::BoundedExposure => "bounded_exposure",
            ConditionId::DefaultDeterrence => "default_deterrence",
            ConditionId::BuyerStrategyOrdering => "buyer_strategy_ordering",
            ConditionId::BuyerParticipation => "buyer_participation",
        }
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    Strict,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub id: ConditionId,
    pub strictness: Strictness,
    pub margin: Ratio,
    pub holds: bool,
}

impl Condition {
    pub fn new(id: ConditionId, strictness: Strictness, margin: Ratio) -> Self {
        let holds = match strictness {
            Strictness::Strict => margin.is_positive(),
            Strictness::Weak => !margin.is_negative(),
        };
        Condition { id, strictness, margin, holds }
    }

    /// Strict inequality failing exactly at equality.
    pub fn is_boundary(&self) -> bool {
        self.strictness == Strictness::Strict && self.margin.is_zero()
    }

    pub fn verdict(&self) -> &'static str {
        if self.holds {
            "holds"
        } else if self.is_boundary() {
            "boundary"
        } else {
            "fails"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncentiveReport {
    pub utilities: StageUtilities,
    pub conditions: Vec<Condition>,
}

impl IncentiveReport {
    pub fn condition(&self, id: ConditionId) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.id == id)
    }

    pub fn all_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }
}

pub(crate) fn sum<I: IntoIterator<Item = Ratio>>(items: I) -> Ratio {
    items.into_iter().sum()
}

/// Smallest per-transaction margin, or zero for an empty transaction set.
pub(crate) fn min_margin<I: IntoIterator<Item = Ratio>>(items: I) -> Ratio {
    items.into_iter().min().unwrap_or_else(Ratio::zero)
}
