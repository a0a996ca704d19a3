//! Over-limit liquidity auction.
//!
//! A single-epoch, commit–reveal, reverse Vickrey auction: stake-backed
//! guarantors compete to fund a buyer's credit deficit, the lowest valid
//! rate wins, and the winner is paid the second-lowest valid rate (or the
//! buyer's cap when it is the only valid bid). The winner pays the
//! merchant directly; the buyer owes the winner the deficit plus interest
//! at the clearing rate when the epoch settles.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::commitment::Digest;
use crate::model::{AgentId, EpochIndex, Role, EPOCH_HOURS};
use crate::money::{apply_rate, Amount, ArithmeticError, Rate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuctionError {
    #[error("buyer {0} already opened an auction in {1}")]
    SecondAuctionSameEpoch(AgentId, EpochIndex),
    #[error("deficit must be positive")]
    ZeroDeficit,
    #[error("guarantor {0} already committed")]
    DuplicateCommit(AgentId),
    #[error("stake {offered} below required lock {required}")]
    InsufficientStake { required: Amount, offered: Amount },
    #[error("operation needs phase {expected:?}, auction is in {actual:?}")]
    WrongPhase { expected: AuctionPhase, actual: AuctionPhase },
    #[error("guarantor {0} has no prior commitment")]
    NoPriorCommit(AgentId),
    #[error("guarantor {0} already revealed")]
    DuplicateReveal(AgentId),
    #[error("agent {0} is not a guarantor")]
    NotAGuarantor(AgentId),
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
}

/// Commitment digest: `SHA-256(rate_ppm as u64 BE || nonce || guarantor id)`.
pub fn bid_digest(rate: Rate, nonce: &[u8; 32], guarantor: &AgentId) -> Digest {
    let mut h = Sha256::new();
    h.update(rate.ppm().to_be_bytes());
    h.update(nonce);
    h.update(guarantor.bytes);
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionConfig {
    pub buyer: AgentId,
    pub merchant: AgentId,
    pub deficit: Amount,
    /// Highest borrowing cost the buyer accepts.
    pub cap: Rate,
    pub epoch: EpochIndex,
    /// Stake each guarantor must lock with its commitment.
    pub required_stake: Amount,
}

/// Tracks which buyers opened an auction in which epoch.
#[derive(Debug, Clone, Default)]
pub struct AuctionRegistry {
    opened: BTreeSet<(EpochIndex, AgentId)>,
}

impl AuctionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn has_opened(&self, buyer: &AgentId, epoch: EpochIndex) -> bool {
        self.opened.contains(&(epoch, *buyer))
    }
}

pub fn open_auction(registry: &mut AuctionRegistry, config: AuctionConfig) -> Result<Auction, AuctionError> {
    if config.deficit <= Amount::ZERO {
        return Err(AuctionError::ZeroDeficit);
    }
    if !registry.opened.insert((config.epoch, config.buyer)) {
        return Err(AuctionError::SecondAuctionSameEpoch(config.buyer, config.epoch));
    }
    Ok(Auction { config, phase: AuctionPhase::Commit, commitments: BTreeMap::new(), reveals: BTreeMap::new() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AuctionPhase {
    Commit,
    Reveal,
    Settled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidCommitment {
    pub guarantor: AgentId,
    #[serde(with = "crate::model::hex_bytes")]
    pub digest: Digest,
    pub locked: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealedBid {
    pub guarantor: AgentId,
    pub rate: Rate,
    #[serde(with = "crate::model::hex_bytes")]
    pub nonce: [u8; 32],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    OverCap,
    DigestMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevealVerdict {
    Valid,
    Invalid(InvalidReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StakeDisposition {
    Released(Amount),
    Slashed(Amount),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clearing {
    pub winner: AgentId,
    pub clearing_rate: Rate,
    pub merchant: AgentId,
    pub buyer: AgentId,
    pub deficit: Amount,
    /// Deficit plus one epoch of interest at the clearing rate, owed by the
    /// buyer to the winner at settlement.
    pub repayment: Amount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    NoAdmissibleBid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuctionOutcome {
    Cleared(Clearing),
    Failed(FailureReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionSettlement {
    pub epoch: EpochIndex,
    pub outcome: AuctionOutcome,
    pub stakes: Vec<(AgentId, StakeDisposition)>,
}

impl AuctionSettlement {
    pub fn slashed_total(&self) -> Result<Amount, ArithmeticError> {
        Amount::checked_sum(self.stakes.iter().filter_map(|(_, d)| match d {
            StakeDisposition::Slashed(a) => Some(*a),
            StakeDisposition::Released(_) => None,
        }))
    }

    pub fn released_total(&self) -> Result<Amount, ArithmeticError> {
        Amount::checked_sum(self.stakes.iter().filter_map(|(_, d)| match d {
            StakeDisposition::Released(a) => Some(*a),
            StakeDisposition::Slashed(_) => None,
        }))
    }
}

/// Reverse Vickrey selection over already-validated bids.
///
/// The lowest rate wins, ties going to the lowest guarantor id; the price
/// is the second-lowest rate, or `cap` when only one bid exists.
pub fn select_winner(valid: &[(AgentId, Rate)], cap: Rate) -> Option<(AgentId, Rate)> {
    let mut sorted = valid.to_vec();
    sorted.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.bytes.cmp(&b.0.bytes)));
    let (winner, _) = *sorted.first()?;
    let price = sorted.get(1).map_or(cap, |(_, r)| *r);
    Some((winner, price))
}

#[derive(Debug, Clone)]
pub struct Auction {
    config: AuctionConfig,
    phase: AuctionPhase,
    commitments: BTreeMap<AgentId, BidCommitment>,
    reveals: BTreeMap<AgentId, (RevealedBid, RevealVerdict)>,
}

impl Auction {
    pub fn config(&self) -> &AuctionConfig {
        &self.config
    }

    pub fn phase(&self) -> AuctionPhase {
        self.phase
    }

    pub fn commitments(&self) -> impl Iterator<Item = &BidCommitment> {
        self.commitments.values()
    }

    pub fn locked_total(&self) -> Result<Amount, ArithmeticError> {
        Amount::checked_sum(self.commitments.values().map(|c| c.locked))
    }

    fn expect_phase(&self, expected: AuctionPhase) -> Result<(), AuctionError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(AuctionError::WrongPhase { expected, actual: self.phase })
        }
    }

    pub fn commit_bid(&mut self, guarantor: AgentId, digest: Digest, stake: Amount) -> Result<(), AuctionError> {
        self.expect_phase(AuctionPhase::Commit)?;
        if guarantor.role != Role::Guarantor {
            return Err(AuctionError::NotAGuarantor(guarantor));
        }
        if self.commitments.contains_key(&guarantor) {
            return Err(AuctionError::DuplicateCommit(guarantor));
        }
        if stake < self.config.required_stake {
            return Err(AuctionError::InsufficientStake { required: self.config.required_stake, offered: stake });
        }
        self.commitments.insert(guarantor, BidCommitment { guarantor, digest, locked: stake });
        Ok(())
    }

    pub fn open_reveal(&mut self) -> Result<(), AuctionError> {
        self.expect_phase(AuctionPhase::Commit)?;
        self.phase = AuctionPhase::Reveal;
        Ok(())
    }

    pub fn reveal_bid(
        &mut self,
        guarantor: AgentId,
        rate: Rate,
        nonce: [u8; 32],
    ) -> Result<RevealVerdict, AuctionError> {
        self.expect_phase(AuctionPhase::Reveal)?;
        let commitment = self.commitments.get(&guarantor).ok_or(AuctionError::NoPriorCommit(guarantor))?;
        if self.reveals.contains_key(&guarantor) {
            return Err(AuctionError::DuplicateReveal(guarantor));
        }
        let verdict = if bid_digest(rate, &nonce, &guarantor) != commitment.digest {
            RevealVerdict::Invalid(InvalidReason::DigestMismatch)
        } else if rate > self.config.cap {
            RevealVerdict::Invalid(InvalidReason::OverCap)
        } else {
            RevealVerdict::Valid
        };
        self.reveals.insert(guarantor, (RevealedBid { guarantor, rate, nonce }, verdict));
        Ok(verdict)
    }

    /// Closes the reveal phase and determines the outcome. Unrevealed and
    /// digest-mismatched commitments forfeit their stake; every other
    /// stake is released.
    pub fn settle(&mut self) -> Result<AuctionSettlement, AuctionError> {
        self.expect_phase(AuctionPhase::Reveal)?;
        let valid: Vec<(AgentId, Rate)> = self
            .reveals
            .values()
            .filter(|(_, v)| *v == RevealVerdict::Valid)
            .map(|(b, _)| (b.guarantor, b.rate))
            .collect();

        let outcome = match select_winner(&valid, self.config.cap) {
            Some((winner, clearing_rate)) => {
                let interest = apply_rate(self.config.deficit, clearing_rate, EPOCH_HOURS)?;
                AuctionOutcome::Cleared(Clearing {
                    winner,
                    clearing_rate,
                    merchant: self.config.merchant,
                    buyer: self.config.buyer,
                    deficit: self.config.deficit,
                    repayment: self.config.deficit.checked_add(interest)?,
                })
            }
            None => AuctionOutcome::Failed(FailureReason::NoAdmissibleBid),
        };

        let stakes = self
            .commitments
            .values()
            .map(|c| {
                let forfeits = match self.reveals.get(&c.guarantor) {
                    None => true,
                    Some((_, RevealVerdict::Invalid(InvalidReason::DigestMismatch))) => true,
                    Some(_) => false,
                };
                let disposition =
                    if forfeits { StakeDisposition::Slashed(c.locked) } else { StakeDisposition::Released(c.locked) };
                (c.guarantor, disposition)
            })
            .collect();

        self.phase = AuctionPhase::Settled;
        Ok(AuctionSettlement { epoch: self.config.epoch, outcome, stakes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: u8) -> AgentId {
        AgentId::new([n; 32], Role::Guarantor)
    }

    fn config(cap_bps: u64) -> AuctionConfig {
        AuctionConfig {
            buyer: AgentId::derive(Role::Buyer, "b"),
            merchant: AgentId::derive(Role::Merchant, "m"),
            deficit: Amount::units(20),
            cap: Rate::from_bps(cap_bps),
            epoch: EpochIndex(0),
            required_stake: Amount::units(20),
        }
    }

    fn run(cap_bps: u64, bids: &[(u8, u64)]) -> AuctionSettlement {
        let mut reg = AuctionRegistry::new();
        let mut a = open_auction(&mut reg, config(cap_bps)).unwrap();
        for (id, bps) in bids {
            let nonce = [*id; 32];
            a.commit_bid(g(*id), bid_digest(Rate::from_bps(*bps), &nonce, &g(*id)), Amount::units(20)).unwrap();
        }
        a.open_reveal().unwrap();
        for (id, bps) in bids {
            a.reveal_bid(g(*id), Rate::from_bps(*bps), [*id; 32]).unwrap();
        }
        a.settle().unwrap()
    }

    #[test]
    fn one_auction_per_buyer_per_epoch() {
        let mut reg = AuctionRegistry::new();
        open_auction(&mut reg, config(600)).unwrap();
        assert!(matches!(open_auction(&mut reg, config(600)), Err(AuctionError::SecondAuctionSameEpoch(..))));
        let mut next = config(600);
        next.epoch = EpochIndex(1);
        assert!(open_auction(&mut reg, next).is_ok());
    }

    #[test]
    fn zero_deficit_rejected() {
        let mut c = config(600);
        c.deficit = Amount::ZERO;
        assert_eq!(open_auction(&mut AuctionRegistry::new(), c).unwrap_err(), AuctionError::ZeroDeficit);
    }

    #[test]
    fn commit_phase_gates() {
        let mut a = open_auction(&mut AuctionRegistry::new(), config(600)).unwrap();
        a.commit_bid(g(1), [0; 32], Amount::units(20)).unwrap();
        assert_eq!(a.commit_bid(g(1), [0; 32], Amount::units(20)), Err(AuctionError::DuplicateCommit(g(1))));
        assert!(matches!(a.commit_bid(g(2), [0; 32], Amount::units(19)), Err(AuctionError::InsufficientStake { .. })));
        assert!(matches!(
            a.commit_bid(AgentId::derive(Role::Buyer, "x"), [0; 32], Amount::units(20)),
            Err(AuctionError::NotAGuarantor(_))
        ));
        a.open_reveal().unwrap();
        assert!(matches!(
            a.commit_bid(g(3), [0; 32], Amount::units(20)),
            Err(AuctionError::WrongPhase { expected: AuctionPhase::Commit, actual: AuctionPhase::Reveal })
        ));
        assert_eq!(a.reveal_bid(g(9), Rate::ZERO, [0; 32]), Err(AuctionError::NoPriorCommit(g(9))));
    }

    #[test]
    fn reveal_verdicts() {
        let mut a = open_auction(&mut AuctionRegistry::new(), config(600)).unwrap();
        let n1 = [1; 32];
        let n2 = [2; 32];
        a.commit_bid(g(1), bid_digest(Rate::from_bps(500), &n1, &g(1)), Amount::units(20)).unwrap();
        a.commit_bid(g(2), bid_digest(Rate::from_bps(700), &n2, &g(2)), Amount::units(20)).unwrap();
        a.commit_bid(g(3), bid_digest(Rate::from_bps(300), &n1, &g(3)), Amount::units(20)).unwrap();
        assert!(a.reveal_bid(g(1), Rate::from_bps(500), n1).is_err());
        a.open_reveal().unwrap();
        assert_eq!(a.reveal_bid(g(1), Rate::from_bps(500), n1).unwrap(), RevealVerdict::Valid);
        assert_eq!(
            a.reveal_bid(g(2), Rate::from_bps(700), n2).unwrap(),
            RevealVerdict::Invalid(InvalidReason::OverCap)
        );
        // The two nonces give different digests, so the wrong one cannot open.
        assert_ne!(bid_digest(Rate::from_bps(300), &n1, &g(3)), bid_digest(Rate::from_bps(300), &n2, &g(3)));
        assert_eq!(
            a.reveal_bid(g(3), Rate::from_bps(300), n2).unwrap(),
            RevealVerdict::Invalid(InvalidReason::DigestMismatch)
        );
        assert_eq!(a.reveal_bid(g(3), Rate::from_bps(300), n1), Err(AuctionError::DuplicateReveal(g(3))));
        let s = a.settle().unwrap();
        let disposition = |id| s.stakes.iter().find(|(a, _)| *a == g(id)).unwrap().1;
        assert_eq!(disposition(3), StakeDisposition::Slashed(Amount::units(20)));
        assert_eq!(disposition(2), StakeDisposition::Released(Amount::units(20)));
        assert_eq!(a.phase(), AuctionPhase::Settled);
        assert!(matches!(a.settle(), Err(AuctionError::WrongPhase { .. })));
    }

    #[test]
    fn vickrey_price_and_reserve() {
        let s = run(600, &[(1, 300), (2, 500), (3, 700)]);
        match s.outcome {
            AuctionOutcome::Cleared(c) => {
                assert_eq!(c.winner, g(1));
                assert_eq!(c.clearing_rate, Rate::from_bps(500));
            }
            other => panic!("unexpected {other:?}"),
        }
        let s = run(600, &[(1, 300)]);
        match s.outcome {
            AuctionOutcome::Cleared(c) => assert_eq!(c.clearing_rate, Rate::from_bps(600)),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(run(600, &[]).outcome, AuctionOutcome::Failed(FailureReason::NoAdmissibleBid));
        assert_eq!(run(600, &[(1, 700)]).outcome, AuctionOutcome::Failed(FailureReason::NoAdmissibleBid));
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let s = run(600, &[(5, 300), (2, 300)]);
        match s.outcome {
            AuctionOutcome::Cleared(c) => {
                assert_eq!(c.winner, g(2));
                assert_eq!(c.clearing_rate, Rate::from_bps(300));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unrevealed_commitments_forfeit() {
        let mut a = open_auction(&mut AuctionRegistry::new(), config(600)).unwrap();
        a.commit_bid(g(1), [0; 32], Amount::units(25)).unwrap();
        a.open_reveal().unwrap();
        let s = a.settle().unwrap();
        assert_eq!(s.outcome, AuctionOutcome::Failed(FailureReason::NoAdmissibleBid));
        assert_eq!(s.slashed_total().unwrap(), Amount::units(25));
        assert_eq!(s.released_total().unwrap(), Amount::ZERO);
    }

    #[test]
    fn repayment_includes_epoch_interest() {
        let s = run(600, &[(1, 300), (2, 500)]);
        let AuctionOutcome::Cleared(c) = s.outcome else { panic!() };
        // 20 units at 5% for 4h: 20 * 0.05 * 4 / 8760 = 0.000456621 -> 457 micro-units.
        assert_eq!(c.repayment, Amount::units(20).checked_add(Amount::from_micros(457)).unwrap());
    }
}
