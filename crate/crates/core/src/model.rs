//! Protocol domain primitives: epochs, agents, actions, transactions and
//! the public signal emitted at every epoch boundary.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::money::Amount;

/// Length of one settlement epoch in model hours.
pub const EPOCH_HOURS: u64 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("transaction payment must be positive, got {0}")]
    NonPositivePayment(Amount),
    #[error("transaction service value must be non-negative, got {0}")]
    NegativeServiceValue(Amount),
    #[error("agent {0} does not have role {1:?}")]
    WrongRole(AgentId, Role),
}

/// Index of a settlement epoch. Model time is abstract hours; epoch `t`
/// covers `[4t, 4t + 4)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpochIndex(pub u64);

impl EpochIndex {
    pub const fn new(index: u64) -> Self {
        EpochIndex(index)
    }

    pub const fn index(self) -> u64 {
        self.0
    }

    pub const fn start_hour(self) -> u64 {
        self.0 * EPOCH_HOURS
    }

    /// End of the epoch; this is also the settlement deadline `t_due`.
    pub const fn end_hour(self) -> u64 {
        (self.0 + 1) * EPOCH_HOURS
    }

    pub const fn next(self) -> Self {
        EpochIndex(self.0 + 1)
    }
}

impl fmt::Display for EpochIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch {}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deadlines {
    pub due: u64,
    pub cure_end: u64,
}

/// Settlement deadline and end of the cure window for obligations accrued
/// in `epoch`.
pub fn settlement_deadline(epoch: EpochIndex, cure_hours: u64) -> Deadlines {
    let due = epoch.end_hour();
    Deadlines { due, cure_end: due + cure_hours }
}

/// Classifies a repayment by the hour it landed. Anything still
/// outstanding after the cure window is a default.
pub fn classify_repayment(paid_at: Option<u64>, deadlines: Deadlines) -> BuyerAction {
    match paid_at {
        Some(t) if t <= deadlines.due => BuyerAction::PayOnTime,
        Some(t) if t <= deadlines.cure_end => BuyerAction::LatePay,
        _ => BuyerAction::Default,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Buyer,
    Merchant,
    Guarantor,
}

impl Role {
    pub const fn tag(self) -> u8 {
        match self {
            Role::Buyer => 1,
            Role::Merchant => 2,
            Role::Guarantor => 3,
        }
    }
}

/// Opaque 32-byte agent identifier plus its protocol role.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId {
    #[serde(with = "hex_bytes")]
    pub bytes: [u8; 32],
    pub role: Role,
}

impl AgentId {
    pub const fn new(bytes: [u8; 32], role: Role) -> Self {
        AgentId { bytes, role }
    }

    /// Deterministic identifier derived from a human label.
    pub fn derive(role: Role, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"micropay/agent");
        h.update([role.tag()]);
        h.update(label.as_bytes());
        AgentId { bytes: h.finalize().into(), role }
    }

    pub fn expect_role(self, role: Role) -> Result<Self, ModelError> {
        if self.role == role {
            Ok(self)
        } else {
            Err(ModelError::WrongRole(self, role))
        }
    }

    pub fn short(&self) -> String {
        hex::encode(&self.bytes[..4])
    }
}

impl fmt::Debug for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{}", self.role, self.short())
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub(crate) mod hex_bytes {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(&s).map_err(de::Error::custom)?;
        v.try_into().map_err(|_| de::Error::custom("expected 32 bytes of hex"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BuyerAction {
    PayOnTime,
    LatePay,
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MerchantAction {
    DeliverOnTime,
    LateDeliver,
    FailToDeliver,
}

/// Role-independent view of an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conduct {
    Conform,
    Late,
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Action {
    Buyer(BuyerAction),
    Merchant(MerchantAction),
}

impl Action {
    pub fn conduct(self) -> Conduct {
        match self {
            Action::Buyer(BuyerAction::PayOnTime) | Action::Merchant(MerchantAction::DeliverOnTime) => Conduct::Conform,
            Action::Buyer(BuyerAction::LatePay) | Action::Merchant(MerchantAction::LateDeliver) => Conduct::Late,
            Action::Buyer(BuyerAction::Default) | Action::Merchant(MerchantAction::FailToDeliver) => Conduct::Default,
        }
    }

    pub fn role(self) -> Role {
        match self {
            Action::Buyer(_) => Role::Buyer,
            Action::Merchant(_) => Role::Merchant,
        }
    }

    /// The action a given role takes for a conduct.
    pub fn for_role(role: Role, conduct: Conduct) -> Option<Action> {
        match (role, conduct) {
            (Role::Buyer, Conduct::Conform) => Some(Action::Buyer(BuyerAction::PayOnTime)),
            (Role::Buyer, Conduct::Late) => Some(Action::Buyer(BuyerAction::LatePay)),
            (Role::Buyer, Conduct::Default) => Some(Action::Buyer(BuyerAction::Default)),
            (Role::Merchant, Conduct::Conform) => Some(Action::Merchant(MerchantAction::DeliverOnTime)),
            (Role::Merchant, Conduct::Late) => Some(Action::Merchant(MerchantAction::LateDeliver)),
            (Role::Merchant, Conduct::Default) => Some(Action::Merchant(MerchantAction::FailToDeliver)),
            (Role::Guarantor, _) => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Buyer(a) => write!(f, "{a:?}"),
            Action::Merchant(a) => write!(f, "{a:?}"),
        }
    }
}

/// A micropayment, assigned to exactly one epoch at submission.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    #[serde(with = "hex_bytes")]
    pub id: [u8; 32],
    pub buyer: AgentId,
    pub merchant: AgentId,
    pub payment: Amount,
    pub service_value: Amount,
    pub epoch: EpochIndex,
}

impl Transaction {
    pub fn new(
        id: [u8; 32],
        buyer: AgentId,
        merchant: AgentId,
        payment: Amount,
        service_value: Amount,
        epoch: EpochIndex,
    ) -> Result<Self, ModelError> {
        buyer.expect_role(Role::Buyer)?;
        merchant.expect_role(Role::Merchant)?;
        if payment <= Amount::ZERO {
            return Err(ModelError::NonPositivePayment(payment));
        }
        if service_value < Amount::ZERO {
            return Err(ModelError::NegativeServiceValue(service_value));
        }
        Ok(Transaction { id, buyer, merchant, payment, service_value, epoch })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalStatus {
    Paid,
    PaidLate,
    Defaulted,
    Delivered,
    DeliveredLate,
    FailedDelivery,
}

impl SignalStatus {
    pub fn of(action: Action) -> Self {
        match action {
            Action::Buyer(BuyerAction::PayOnTime) => SignalStatus::Paid,
            Action::Buyer(BuyerAction::LatePay) => SignalStatus::PaidLate,
            Action::Buyer(BuyerAction::Default) => SignalStatus::Defaulted,
            Action::Merchant(MerchantAction::DeliverOnTime) => SignalStatus::Delivered,
            Action::Merchant(MerchantAction::LateDeliver) => SignalStatus::DeliveredLate,
            Action::Merchant(MerchantAction::FailToDeliver) => SignalStatus::FailedDelivery,
        }
    }

    pub fn is_default(self) -> bool {
        matches!(self, SignalStatus::Defaulted | SignalStatus::FailedDelivery)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    LatePayment,
    LateDelivery,
    CollateralConfiscation,
    DeliveryDefault,
    BidForfeit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStatus {
    pub agent: AgentId,
    pub status: SignalStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PenaltyTrigger {
    pub agent: AgentId,
    pub kind: PenaltyKind,
    pub amount: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustUpdate {
    pub agent: AgentId,
    pub before: u32,
    pub after: u32,
}

/// Everything incentive-relevant that became public at an epoch boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicSignal {
    pub epoch: EpochIndex,
    pub outcomes: Vec<AgentStatus>,
    pub penalties: Vec<PenaltyTrigger>,
    pub trust_updates: Vec<TrustUpdate>,
    pub misuse_flags: Vec<AgentId>,
}

impl PublicSignal {
    pub fn status_of(&self, agent: &AgentId) -> Option<SignalStatus> {
        self.outcomes.iter().find(|o| &o.agent == agent).map(|o| o.status)
    }

    pub fn has_default(&self) -> bool {
        self.outcomes.iter().any(|o| o.status.is_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deadlines() {
        assert_eq!(settlement_deadline(EpochIndex(0), 1), Deadlines { due: 4, cure_end: 5 });
        assert_eq!(settlement_deadline(EpochIndex(2), 0), Deadlines { due: 12, cure_end: 12 });
        assert_eq!(settlement_deadline(EpochIndex(5), 2), Deadlines { due: 24, cure_end: 26 });
    }

    #[test]
    fn repayment_classification() {
        let d = settlement_deadline(EpochIndex(0), 1);
        assert_eq!(classify_repayment(Some(4), d), BuyerAction::PayOnTime);
        assert_eq!(classify_repayment(Some(5), d), BuyerAction::LatePay);
        assert_eq!(classify_repayment(Some(6), d), BuyerAction::Default);
        assert_eq!(classify_repayment(None, d), BuyerAction::Default);
    }

    #[test]
    fn transaction_validation() {
        let b = AgentId::derive(Role::Buyer, "b");
        let m = AgentId::derive(Role::Merchant, "m");
        let e = EpochIndex(0);
        assert!(Transaction::new([0; 32], b, m, Amount::units(1), Amount::ZERO, e).is_ok());
        assert_eq!(
            Transaction::new([0; 32], b, m, Amount::ZERO, Amount::ZERO, e),
            Err(ModelError::NonPositivePayment(Amount::ZERO))
        );
        assert!(Transaction::new([0; 32], b, m, Amount::units(1), Amount::units(-1), e).is_err());
        assert!(Transaction::new([0; 32], m, b, Amount::units(1), Amount::ZERO, e).is_err());
    }

    #[test]
    fn derived_ids_are_distinct_per_role() {
        let a = AgentId::derive(Role::Buyer, "x");
        let b = AgentId::derive(Role::Merchant, "x");
        assert_ne!(a.bytes, b.bytes);
        assert_eq!(a, AgentId::derive(Role::Buyer, "x"));
    }
}
