use serde::{Deserialize, Serialize};

use super::{
    check_discount, min_margin, sum, Condition, ConditionId, IncentiveError, IncentiveReport, StageUtilities,
    Strictness,
};
use crate::money::{Amount, Ratio};

/// Per-transaction terms seen by a merchant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MerchantTx {
    pub payment: Amount,
    pub fee: Amount,
    pub exec_cost: Amount,
    pub fee_rebate: Amount,
    /// Upper bound on what the merchant can earn by holding on to the
    /// transaction's resources while delaying.
    pub outside_option: Amount,
    pub late_penalty: Amount,
    pub default_penalty: Amount,
}

fn default_punishment_epochs() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MerchantParams {
    pub transactions: Vec<MerchantTx>,
    /// Per-epoch reward for a compliant staking position.
    pub stake_reward: Amount,
    /// Opportunity cost of the locked stake over one epoch.
    pub stake_cost: Amount,
    /// Bound on aggregate execution cost per epoch.
    pub exec_cap: Amount,
    #[serde(default = "default_punishment_epochs")]
    pub punishment_epochs: u32,
    /// Lower bound on the per-epoch loss while rewards are suspended.
    pub loss_floor: Amount,
    pub discount: Ratio,
}

impl Default for MerchantParams {
    fn default() -> Self {
        MerchantParams {
            transactions: Vec::new(),
            stake_reward: Amount::ZERO,
            stake_cost: Amount::ZERO,
            exec_cap: Amount::ZERO,
            punishment_epochs: default_punishment_epochs(),
            loss_floor: Amount::ZERO,
            discount: Ratio::zero(),
        }
    }
}

impl Default for Ratio {
    fn default() -> Self {
        Ratio::zero()
    }
}

impl MerchantParams {
    fn total(&self, f: impl Fn(&MerchantTx) -> Amount) -> Ratio {
        sum(self.transactions.iter().map(|t| f(t).to_ratio()))
    }

    /// Rewards withheld during punishment: fee rebates plus the staking reward.
    pub fn suspended_rewards(&self) -> Ratio {
        self.total(|t| t.fee_rebate) + self.stake_reward.to_ratio()
    }
}

/// Epoch utility of delivering on time, delaying every transaction, and
/// walking away.
pub fn merchant_utilities(p: &MerchantParams) -> StageUtilities {
    let r = Amount::to_ratio;
    let conform_core =
        p.total(|t| t.payment) - p.total(|t| t.fee) - p.total(|t| t.exec_cost) + p.total(|t| t.fee_rebate);
    let conform = &conform_core + r(p.stake_reward) - r(p.stake_cost);
    let late = &conform_core + p.total(|t| t.outside_option) - p.total(|t| t.late_penalty) + r(p.stake_reward)
        - r(p.stake_cost);
    let default =
        p.total(|t| t.payment) + p.total(|t| t.outside_option) - p.total(|t| t.default_penalty) - r(p.stake_cost);
    StageUtilities { conform, late, default }
}

pub fn check_merchant_conditions(p: &MerchantParams) -> IncentiveReport {
    let u = merchant_utilities(p);
    let r = Amount::to_ratio;

    let delivery = min_margin(p.transactions.iter().map(|t| r(t.late_penalty) - r(t.outside_option)));
    let liability = r(p.exec_cap) - p.total(|t| t.exec_cost);
    let liveness = r(p.stake_reward) + p.total(|t| t.default_penalty)
        - (r(p.exec_cap) + p.total(|t| t.fee) + p.total(|t| t.late_penalty) - p.total(|t| t.fee_rebate));
    let ordering = (&u.conform - &u.late).min(&u.late - &u.default);
    let participation = p.total(|t| t.fee_rebate) + r(p.stake_reward)
        - (p.total(|t| t.exec_cost) + p.total(|t| t.fee) + r(p.stake_cost));

    IncentiveReport {
        conditions: vec![
            Condition::new(ConditionId::TimelyDeliveryDominance, Strictness::Strict, delivery),
            Condition::new(ConditionId::BoundedLiability, Strictness::Weak, liability),
            Condition::new(ConditionId::SettlementLiveness, Strictness::Strict, liveness),
            Condition::new(ConditionId::MerchantStrictOrdering, Strictness::Strict, ordering),
            Condition::new(ConditionId::MerchantParticipation, Strictness::Weak, participation),
        ],
        utilities: u,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuspensionLoss {
    /// Closed form `(1 - δ^T) / (1 - δ) * ℓ`.
    pub bound: Ratio,
    /// Term-by-term discounted sum over the punishment horizon.
    pub exact_sum: Ratio,
}

/// Discounted loss from `periods` epochs of suspended rewards at a
/// constant per-epoch loss of `floor`.
pub fn suspension_loss(discount: &Ratio, periods: u32, floor: Amount) -> Result<SuspensionLoss, IncentiveError> {
    check_discount(discount)?;
    let floor = floor.to_ratio();
    let one = Ratio::one();
    let bound = (&one - discount.pow(periods)) / (&one - discount) * &floor;
    let mut exact_sum = Ratio::zero();
    let mut weight = Ratio::one();
    for _ in 0..periods {
        exact_sum = exact_sum + &weight * &floor;
        weight = weight * discount;
    }
    Ok(SuspensionLoss { bound, exact_sum })
}

/// Discounted value of an arbitrary per-epoch loss sequence, first epoch
/// undiscounted.
pub fn discounted_loss(discount: &Ratio, losses: &[Amount]) -> Result<Ratio, IncentiveError> {
    check_discount(discount)?;
    let mut total = Ratio::zero();
    let mut weight = Ratio::one();
    for loss in losses {
        total = total + &weight * loss.to_ratio();
        weight = weight * discount;
    }
    Ok(total)
}

/// Whether conforming is a perfect public equilibrium for every discount
/// factor: the stage ordering is strict and the continuation loss from
/// punishment is non-negative.
pub fn verify_merchant_ppe(p: &MerchantParams) -> bool {
    let report = check_merchant_conditions(p);
    let ordered =
        [ConditionId::TimelyDeliveryDominance, ConditionId::SettlementLiveness, ConditionId::MerchantStrictOrdering]
            .iter()
            .all(|id| report.condition(*id).is_some_and(|c| c.holds));
    // The loss is a sum of δ^k·ℓ terms with δ ≥ 0, so its sign is the sign of ℓ.
    ordered && !p.loss_floor.is_negative()
}
