use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{credit_update, step_phase, trust_step, PenaltyPhase, SettlementError, SettlementState};
use crate::auction::{AuctionOutcome, AuctionSettlement, StakeDisposition};
use crate::commitment::{verify_inclusion, InclusionProof, LeafRecord, RootKind, RootLedger};
use crate::model::{
    Action, AgentId, AgentStatus, Conduct, EpochIndex, PenaltyKind, PenaltyTrigger, PublicSignal, Role, SignalStatus,
    Transaction, TrustUpdate,
};
use crate::money::Amount;

/// Protocol charges and rebates attached to one transaction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TxTerms {
    pub fee: Amount,
    pub fee_rebate: Amount,
    pub buyer_late_penalty: Amount,
    pub merchant_late_penalty: Amount,
    pub merchant_default_penalty: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenTx {
    pub tx: Transaction,
    pub proof: InclusionProof,
    pub terms: TxTerms,
}

/// Everything settlement needs for one epoch. Stored in traces so that an
/// epoch can be replayed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochInput {
    pub epoch: EpochIndex,
    pub actions: Vec<(AgentId, Action)>,
    pub transactions: Vec<ProvenTx>,
    #[serde(default)]
    pub auctions: Vec<AuctionSettlement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub agent: AgentId,
    pub conduct: Conduct,
    pub rewards: Amount,
    pub penalties: Amount,
    /// Penalty amount the agent could not cover.
    pub uncollected: Amount,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub credit_before: Option<Amount>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub credit_after: Option<Amount>,
    pub trust_before: u32,
    pub trust_after: u32,
    pub phase_before: PenaltyPhase,
    pub phase_after: PenaltyPhase,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceDelta {
    pub agent: AgentId,
    pub wallet: Amount,
    /// Stake for buyers and merchants, auction lock for guarantors.
    pub stake: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueFlows {
    pub balances: Vec<BalanceDelta>,
    pub penalty_pool: Amount,
    pub reward_pool: Amount,
}

impl ValueFlows {
    /// Sum of every delta in micro-units; zero when value is conserved.
    pub fn residual(&self) -> i128 {
        let agents: i128 = self.balances.iter().map(|d| d.wallet.micros() as i128 + d.stake.micros() as i128).sum();
        agents + self.penalty_pool.micros() as i128 + self.reward_pool.micros() as i128
    }

    pub fn delta_of(&self, agent: &AgentId) -> Option<&BalanceDelta> {
        self.balances.iter().find(|d| d.agent == *agent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSettlement {
    pub epoch: EpochIndex,
    pub outcomes: Vec<AgentOutcome>,
    pub signal: PublicSignal,
    pub flows: ValueFlows,
}

impl EpochSettlement {
    pub fn outcome_of(&self, agent: &AgentId) -> Option<&AgentOutcome> {
        self.outcomes.iter().find(|o| o.agent == *agent)
    }
}

fn debit(wallet: &mut Amount, amount: Amount, agent: AgentId) -> Result<(), SettlementError> {
    if *wallet < amount {
        return Err(SettlementError::InsufficientFunds { agent, needed: amount });
    }
    *wallet = wallet.checked_sub(amount)?;
    Ok(())
}

/// Takes up to `amount` from the two balances in order and returns
/// `(collected, shortfall)`.
fn collect(first: &mut Amount, second: &mut Amount, amount: Amount) -> Result<(Amount, Amount), SettlementError> {
    let from_first = amount.min((*first).max(Amount::ZERO));
    *first = first.checked_sub(from_first)?;
    let rest = amount.checked_sub(from_first)?;
    let from_second = rest.min((*second).max(Amount::ZERO));
    *second = second.checked_sub(from_second)?;
    let collected = from_first.checked_add(from_second)?;
    Ok((collected, amount.checked_sub(collected)?))
}

fn pay_reward(pool: &mut Amount, wallet: &mut Amount, amount: Amount) -> Result<(), SettlementError> {
    if *pool < amount {
        return Err(SettlementError::RewardPoolExhausted { needed: amount });
    }
    *pool = pool.checked_sub(amount)?;
    *wallet = wallet.checked_add(amount)?;
    Ok(())
}

fn sum_by(txs: &[&ProvenTx], f: impl Fn(&ProvenTx) -> Amount) -> Result<Amount, SettlementError> {
    Ok(Amount::checked_sum(txs.iter().map(|t| f(t)))?)
}

fn validate(
    state: &SettlementState,
    ledger: &RootLedger,
    input: &EpochInput,
) -> Result<BTreeMap<AgentId, Action>, SettlementError> {
    if input.epoch != state.next_epoch {
        return Err(SettlementError::EpochOutOfOrder { expected: state.next_epoch, got: input.epoch });
    }
    let mut actions = BTreeMap::new();
    for (agent, action) in &input.actions {
        if agent.role != action.role() {
            return Err(SettlementError::RoleMismatch(*agent));
        }
        let known = match agent.role {
            Role::Buyer => state.buyer(agent).map(|b| b.alive),
            Role::Merchant => state.merchant(agent).map(|m| m.alive),
            Role::Guarantor => return Err(SettlementError::RoleMismatch(*agent)),
        };
        match known {
            None => return Err(SettlementError::UnknownAgent(*agent)),
            Some(false) => return Err(SettlementError::AgentNotAlive(*agent)),
            Some(true) => {}
        }
        if actions.insert(*agent, *action).is_some() {
            return Err(SettlementError::DuplicateAction(*agent));
        }
    }

    let root = ledger.root_for(input.epoch, RootKind::TxRoot);
    for item in &input.transactions {
        let proven = item.tx.epoch == input.epoch
            && root.as_ref().is_some_and(|r| verify_inclusion(r, &LeafRecord::Tx(item.tx.clone()), &item.proof));
        if !proven {
            return Err(SettlementError::UnprovenTransaction(item.tx.id));
        }
        for party in [item.tx.buyer, item.tx.merchant] {
            if !actions.contains_key(&party) {
                return Err(SettlementError::MissingAction(party));
            }
        }
    }
    for auction in &input.auctions {
        if auction.epoch != input.epoch {
            return Err(SettlementError::EpochOutOfOrder { expected: input.epoch, got: auction.epoch });
        }
    }
    Ok(actions)
}

struct Funding {
    /// Deficit paid to each merchant on the buyer's behalf.
    to_merchant: BTreeMap<(AgentId, AgentId), Amount>,
    /// Repayments the buyer owes, per guarantor.
    repayments: BTreeMap<AgentId, Vec<(AgentId, Amount)>>,
}

fn apply_auctions(
    s: &mut SettlementState,
    auctions: &[AuctionSettlement],
    penalties: &mut Vec<PenaltyTrigger>,
) -> Result<Funding, SettlementError> {
    let mut funding = Funding { to_merchant: BTreeMap::new(), repayments: BTreeMap::new() };
    for auction in auctions {
        for (guarantor, disposition) in &auction.stakes {
            let (amount, slashed) = match disposition {
                StakeDisposition::Released(a) => (*a, false),
                StakeDisposition::Slashed(a) => (*a, true),
            };
            let g = s.guarantor_mut(guarantor)?;
            if g.locked < amount {
                return Err(SettlementError::LockMismatch(*guarantor));
            }
            g.locked = g.locked.checked_sub(amount)?;
            if slashed {
                s.penalty_pool = s.penalty_pool.checked_add(amount)?;
                penalties.push(PenaltyTrigger { agent: *guarantor, kind: PenaltyKind::BidForfeit, amount });
            } else {
                g.wallet = g.wallet.checked_add(amount)?;
            }
        }
        if let AuctionOutcome::Cleared(c) = &auction.outcome {
            debit(&mut s.guarantor_mut(&c.winner)?.wallet, c.deficit, c.winner)?;
            let m = s.merchant_mut(&c.merchant)?;
            m.wallet = m.wallet.checked_add(c.deficit)?;
            let slot = funding.to_merchant.entry((c.buyer, c.merchant)).or_insert(Amount::ZERO);
            *slot = slot.checked_add(c.deficit)?;
            funding.repayments.entry(c.buyer).or_default().push((c.winner, c.repayment));
        }
    }
    Ok(funding)
}

/// Settles one epoch and returns the successor state.
///
/// The input state is never modified, so a failed settlement has no
/// effect.
pub fn settle_epoch(
    state: &SettlementState,
    ledger: &RootLedger,
    input: &EpochInput,
) -> Result<(SettlementState, EpochSettlement), SettlementError> {
    let actions = validate(state, ledger, input)?;
    let mut s = state.clone();
    let cfg = s.config.clone();
    let mut outcomes = Vec::new();
    let mut penalties = Vec::new();
    let mut misuse = Vec::new();

    let funding = apply_auctions(&mut s, &input.auctions, &mut penalties)?;

    for bi in 0..s.buyers.len() {
        let id = s.buyers[bi].id;
        if s.buyers[bi].misuse_flags > 0 {
            misuse.push(id);
            s.buyers[bi].misuse_flags = 0;
        }
        let Some(action) = actions.get(&id) else { continue };
        let conduct = action.conduct();
        let txs: Vec<&ProvenTx> = input.transactions.iter().filter(|t| t.tx.buyer == id).collect();

        // Payments to merchants, net of any auction funding.
        if conduct != Conduct::Default {
            let mut owed: BTreeMap<AgentId, Amount> = BTreeMap::new();
            for t in &txs {
                let slot = owed.entry(t.tx.merchant).or_insert(Amount::ZERO);
                *slot = slot.checked_add(t.tx.payment)?;
            }
            for (merchant, total) in owed {
                let funded = funding.to_merchant.get(&(id, merchant)).copied().unwrap_or(Amount::ZERO);
                let due = total.checked_sub(funded)?.max(Amount::ZERO);
                debit(&mut s.buyers[bi].wallet, due, id)?;
                let m = s.merchant_mut(&merchant)?;
                m.wallet = m.wallet.checked_add(due)?;
            }
            for (guarantor, repayment) in funding.repayments.get(&id).into_iter().flatten() {
                debit(&mut s.buyers[bi].wallet, *repayment, id)?;
                let g = s.guarantor_mut(guarantor)?;
                g.wallet = g.wallet.checked_add(*repayment)?;
            }
        }

        let b = &mut s.buyers[bi];
        let phase_before = b.phase;
        let trust_before = b.trust;
        let credit_before = b.credit_limit;
        let punished = phase_before.is_punished();
        let mut rewards = Amount::ZERO;
        let mut charged = Amount::ZERO;
        let mut uncollected = Amount::ZERO;

        match conduct {
            Conduct::Conform => {
                if !punished {
                    rewards = b.terms.tx_rebate.checked_add(b.terms.stake_reward)?;
                    b.credit_limit =
                        credit_update(b.credit_limit, conduct, b.terms.credit_reward, b.terms.credit_penalty, &cfg)?;
                }
            }
            Conduct::Late => {
                if !punished {
                    rewards = b.terms.stake_reward;
                }
                let due = sum_by(&txs, |t| t.terms.buyer_late_penalty)?;
                let (got, short) = collect(&mut b.wallet, &mut b.stake, due)?;
                s.penalty_pool = s.penalty_pool.checked_add(got)?;
                (charged, uncollected) = (got, short);
                if due > Amount::ZERO {
                    penalties.push(PenaltyTrigger { agent: id, kind: PenaltyKind::LatePayment, amount: got });
                }
                b.credit_limit =
                    credit_update(b.credit_limit, conduct, b.terms.credit_reward, b.terms.credit_penalty, &cfg)?;
            }
            Conduct::Default => {
                let confiscated = b.stake;
                b.stake = Amount::ZERO;
                s.penalty_pool = s.penalty_pool.checked_add(confiscated)?;
                charged = confiscated;
                penalties.push(PenaltyTrigger {
                    agent: id,
                    kind: PenaltyKind::CollateralConfiscation,
                    amount: confiscated,
                });
                b.credit_limit = Amount::ZERO;
                b.alive = false;
            }
        }
        pay_reward(&mut s.reward_pool, &mut b.wallet, rewards)?;
        b.trust = trust_step(b.trust, conduct, phase_before, &cfg);
        if conduct != Conduct::Default {
            b.phase = step_phase(phase_before, conduct == Conduct::Conform, &cfg);
        }
        b.used_credit = Amount::ZERO;
        outcomes.push(AgentOutcome {
            agent: id,
            conduct,
            rewards,
            penalties: charged,
            uncollected,
            credit_before: Some(credit_before),
            credit_after: Some(b.credit_limit),
            trust_before,
            trust_after: b.trust,
            phase_before,
            phase_after: b.phase,
            alive: b.alive,
        });
    }

    for mi in 0..s.merchants.len() {
        let id = s.merchants[mi].id;
        let Some(action) = actions.get(&id) else { continue };
        let conduct = action.conduct();
        let txs: Vec<&ProvenTx> = input.transactions.iter().filter(|t| t.tx.merchant == id).collect();
        let m = &mut s.merchants[mi];
        let phase_before = m.phase;
        let trust_before = m.trust;
        let mut rewards = Amount::ZERO;
        let mut charged = Amount::ZERO;
        let mut uncollected = Amount::ZERO;

        if conduct == Conduct::Default {
            let due = sum_by(&txs, |t| t.terms.merchant_default_penalty)?;
            let (got, short) = collect(&mut m.stake, &mut m.wallet, due)?;
            s.penalty_pool = s.penalty_pool.checked_add(got)?;
            (charged, uncollected) = (got, short);
            penalties.push(PenaltyTrigger { agent: id, kind: PenaltyKind::DeliveryDefault, amount: got });
            m.alive = false;
        } else {
            let fees = sum_by(&txs, |t| t.terms.fee)?;
            debit(&mut m.wallet, fees, id)?;
            s.reward_pool = s.reward_pool.checked_add(fees)?;
            if !phase_before.is_punished() {
                rewards = sum_by(&txs, |t| t.terms.fee_rebate)?.checked_add(m.stake_reward)?;
            }
            if conduct == Conduct::Late {
                let due = sum_by(&txs, |t| t.terms.merchant_late_penalty)?;
                let (got, short) = collect(&mut m.wallet, &mut m.stake, due)?;
                s.penalty_pool = s.penalty_pool.checked_add(got)?;
                (charged, uncollected) = (got, short);
                if due > Amount::ZERO {
                    penalties.push(PenaltyTrigger { agent: id, kind: PenaltyKind::LateDelivery, amount: got });
                }
            }
            pay_reward(&mut s.reward_pool, &mut m.wallet, rewards)?;
            m.phase = step_phase(phase_before, conduct == Conduct::Conform, &cfg);
        }
        m.trust = trust_step(m.trust, conduct, phase_before, &cfg);
        outcomes.push(AgentOutcome {
            agent: id,
            conduct,
            rewards,
            penalties: charged,
            uncollected,
            credit_before: None,
            credit_after: None,
            trust_before,
            trust_after: m.trust,
            phase_before,
            phase_after: m.phase,
            alive: m.alive,
        });
    }

    s.next_epoch = input.epoch.next();
    let flows = diff(state, &s)?;
    debug_assert_eq!(flows.residual(), 0);

    let signal = PublicSignal {
        epoch: input.epoch,
        outcomes: outcomes
            .iter()
            .map(|o| AgentStatus { agent: o.agent, status: SignalStatus::of(actions[&o.agent]) })
            .collect(),
        penalties,
        trust_updates: outcomes
            .iter()
            .map(|o| TrustUpdate { agent: o.agent, before: o.trust_before, after: o.trust_after })
            .collect(),
        misuse_flags: misuse,
    };
    Ok((s, EpochSettlement { epoch: input.epoch, outcomes, signal, flows }))
}

fn diff(before: &SettlementState, after: &SettlementState) -> Result<ValueFlows, SettlementError> {
    let mut balances = Vec::new();
    let mut push = |agent, w0: Amount, w1: Amount, s0: Amount, s1: Amount| -> Result<(), SettlementError> {
        let wallet = w1.checked_sub(w0)?;
        let stake = s1.checked_sub(s0)?;
        if wallet != Amount::ZERO || stake != Amount::ZERO {
            balances.push(BalanceDelta { agent, wallet, stake });
        }
        Ok(())
    };
    for (a, b) in before.buyers.iter().zip(&after.buyers) {
        push(a.id, a.wallet, b.wallet, a.stake, b.stake)?;
    }
    for (a, b) in before.merchants.iter().zip(&after.merchants) {
        push(a.id, a.wallet, b.wallet, a.stake, b.stake)?;
    }
    for (a, b) in before.guarantors.iter().zip(&after.guarantors) {
        push(a.id, a.wallet, b.wallet, a.locked, b.locked)?;
    }
    Ok(ValueFlows {
        balances,
        penalty_pool: after.penalty_pool.checked_sub(before.penalty_pool)?,
        reward_pool: after.reward_pool.checked_sub(before.reward_pool)?,
    })
}
