use serde::{Deserialize, Serialize};

use super::{
    check_discount, min_margin, sum, Condition, ConditionId, IncentiveError, IncentiveReport, StageUtilities,
    Strictness,
};
use crate::model::EPOCH_HOURS;
use crate::money::{Amount, Rate, Ratio, HOURS_PER_YEAR};

/// Per-transaction terms seen by a buyer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuyerTx {
    pub service_value: Amount,
    pub payment: Amount,
    /// Upper bound on the short-term benefit of holding the principal
    /// through the cure period.
    pub outside_option: Amount,
    pub late_penalty: Amount,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuyerParams {
    pub transactions: Vec<BuyerTx>,
    pub tx_rebate: Amount,
    pub stake_reward: Amount,
    pub stake_cost: Amount,
    pub financing_cost: Amount,
    pub credit_reward: Amount,
    pub credit_penalty: Amount,
    pub credit_limit: Amount,
    /// Collateral; fully confiscated on default.
    pub stake: Amount,
    /// Monetary value of one unit of credit capacity.
    pub conversion: Ratio,
    pub max_exposure: Amount,
    /// Per-epoch utility on the conforming path. Falls back to the stage
    /// utility of conforming when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conforming_utility: Option<Ratio>,
    pub discount: Ratio,
    pub opportunity_rate: Rate,
}

impl BuyerParams {
    fn total(&self, f: impl Fn(&BuyerTx) -> Amount) -> Ratio {
        sum(self.transactions.iter().map(|t| f(t).to_ratio()))
    }

    pub fn total_payment(&self) -> Ratio {
        self.total(|t| t.payment)
    }

    /// Continuation utility per conforming epoch.
    pub fn conforming_utility(&self) -> Ratio {
        self.conforming_utility.clone().unwrap_or_else(|| buyer_utilities(self).conform)
    }

    /// Monetary value of the rewards withheld while punished.
    pub fn suspended_rewards(&self) -> Ratio {
        self.tx_rebate.to_ratio() + self.stake_reward.to_ratio() + &self.conversion * self.credit_reward.to_ratio()
    }

    pub fn validate(&self) -> Result<(), IncentiveError> {
        check_discount(&self.discount)?;
        if self.conversion.is_negative() {
            return Err(IncentiveError::NegativeConversion(self.conversion.clone()));
        }
        Ok(())
    }
}

/// Stage utilities of repaying on time, repaying late and defaulting.
///
/// The default row charges `ω·CL` in the stage itself, while the loss of
/// credit access also drives the continuation comparison in
/// [`default_deviation_gain`]; read together the two may count the same
/// loss twice.
pub fn buyer_utilities(p: &BuyerParams) -> StageUtilities {
    let r = Amount::to_ratio;
    let w = p.total(|t| t.service_value);
    let v = p.total(|t| t.payment);
    let psi = p.total(|t| t.outside_option);
    let omega = &p.conversion;

    let conform = &w - &v + r(p.tx_rebate) + r(p.stake_reward) - r(p.stake_cost) + omega * r(p.credit_reward);
    let late = &w - &v + &psi - p.total(|t| t.late_penalty) + r(p.stake_reward)
        - r(p.financing_cost)
        - r(p.stake_cost)
        - omega * r(p.credit_penalty);
    let default = &w + &psi - r(p.stake) - r(p.stake_cost) - omega * r(p.credit_limit);
    StageUtilities { conform, late, default }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaThreshold {
    pub value: Ratio,
    /// Collateral covers the whole exposure, so default yields no gain.
    pub over_collateralized: bool,
}

/// Smallest discount factor at which the continuation value of the
/// conforming path outweighs the uncollateralized exposure.
pub fn delta_threshold(
    max_exposure: Amount,
    stake: Amount,
    conforming_utility: &Ratio,
) -> Result<DeltaThreshold, IncentiveError> {
    let gap = max_exposure.to_ratio() - stake.to_ratio();
    if !gap.is_positive() {
        return Ok(DeltaThreshold { value: Ratio::zero(), over_collateralized: gap.is_negative() });
    }
    if !conforming_utility.is_positive() {
        return Err(IncentiveError::NoDeterrence);
    }
    let value = &gap / &(&gap + conforming_utility);
    Ok(DeltaThreshold { value, over_collateralized: false })
}

/// Immediate gain minus discounted continuation loss of a single default:
/// `(v_max - S) - δ·ū/(1 - δ)`.
pub fn default_deviation_gain(
    max_exposure: Amount,
    stake: Amount,
    conforming_utility: &Ratio,
    discount: &Ratio,
) -> Result<Ratio, IncentiveError> {
    check_discount(discount)?;
    let continuation = discount * conforming_utility / (Ratio::one() - discount);
    Ok(max_exposure.to_ratio() - stake.to_ratio() - continuation)
}

pub fn check_buyer_conditions(p: &BuyerParams) -> Result<IncentiveReport, IncentiveError> {
    p.validate()?;
    let u = buyer_utilities(p);
    let r = Amount::to_ratio;

    let repayment = min_margin(p.transactions.iter().map(|t| r(t.late_penalty) - r(t.outside_option)));
    let exposure = r(p.max_exposure) - p.total_payment();
    let deterrence = -default_deviation_gain(p.max_exposure, p.stake, &p.conforming_utility(), &p.discount)?;
    let ordering = (&u.conform - &u.late).min(deterrence.clone());

    // Interest the buyer avoids by borrowing the uncollateralized part of
    // this epoch's payments instead of funding it, over one epoch.
    let uncovered = p.total_payment() - r(p.stake);
    let avoided = if uncovered.is_positive() {
        uncovered * p.opportunity_rate.to_ratio() * Ratio::new(EPOCH_HOURS as i64, HOURS_PER_YEAR as i64)?
    } else {
        Ratio::zero()
    };
    let participation = avoided - r(p.financing_cost);

    Ok(IncentiveReport {
        conditions: vec![
            Condition::new(ConditionId::TimelyRepaymentDominance, Strictness::Strict, repayment),
            Condition::new(ConditionId::BoundedExposure, Strictness::Weak, exposure),
            Condition::new(ConditionId::DefaultDeterrence, Strictness::Weak, deterrence),
            Condition::new(ConditionId::BuyerStrategyOrdering, Strictness::Strict, ordering),
            Condition::new(ConditionId::BuyerParticipation, Strictness::Weak, participation),
        ],
        utilities: u,
    })
}

/// Conforming is a perfect public equilibrium when delay is dominated in
/// the stage game and the discount factor deters default.
pub fn verify_buyer_ppe(p: &BuyerParams) -> Result<bool, IncentiveError> {
    let report = check_buyer_conditions(p)?;
    Ok([ConditionId::TimelyRepaymentDominance, ConditionId::DefaultDeterrence]
        .iter()
        .all(|id| report.condition(*id).is_some_and(|c| c.holds)))
}
