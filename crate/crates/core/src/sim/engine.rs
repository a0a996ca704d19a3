use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::{DefaultPayoff, ScenarioConfig, SimError, Strategy};
use crate::auction::{bid_digest, open_auction, AuctionConfig, AuctionOutcome, AuctionRegistry, AuctionSettlement};
use crate::commitment::{
    CreditRecord, LeafRecord, LedgerConfig, MerkleRoot, MerkleTree, RootKind, RootLedger, Submission,
};
use crate::incentives::{buyer_utilities, merchant_utilities, BuyerParams, MerchantParams};
use crate::model::{Action, AgentId, Conduct, EpochIndex, PublicSignal, Role, Transaction};
use crate::money::{Amount, Ratio};
use crate::settlement::{
    authorize_payment, settle_epoch, Authorization, BuyerAccount, BuyerTerms, EpochInput, EpochSettlement,
    GuarantorAccount, MerchantAccount, PenaltyPhase, ProvenTx, SettlementState, TxTerms,
};

/// State changes that happen inside an epoch, before settlement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum IntraEpochEvent {
    StakeLocked { guarantor: AgentId, amount: Amount },
    MisuseFlagged { buyer: AgentId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Over the credit limit and beyond the admissible risk bound.
    Misuse,
    /// Over-limit and no auction cleared the deficit.
    Unfunded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedTx {
    pub buyer: AgentId,
    pub index: usize,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentEpoch {
    pub name: String,
    pub agent: AgentId,
    /// `None` when the agent did not take part in the epoch.
    pub conduct: Option<Conduct>,
    pub stage_payoff: Ratio,
    pub phase: Option<PenaltyPhase>,
    pub trust: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub credit_limit: Option<Amount>,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: EpochIndex,
    pub events: Vec<IntraEpochEvent>,
    pub dropped: Vec<DroppedTx>,
    pub tx_root: MerkleRoot,
    pub credit_root: MerkleRoot,
    pub input: EpochInput,
    pub settlement: EpochSettlement,
    pub agents: Vec<AgentEpoch>,
}

impl EpochRecord {
    pub fn agent(&self, name: &str) -> Option<&AgentEpoch> {
        self.agents.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub name: String,
    pub agent: AgentId,
    /// `Σ δ^t u_t` over the simulated horizon.
    pub discounted_payoff: Ratio,
    /// Bound on the absolute value of the untruncated remainder,
    /// `δ^H · max_t |u_t| / (1 - δ)`.
    pub tail_bound: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub name: String,
    pub horizon: u64,
    pub discount: Ratio,
    pub epochs: Vec<EpochRecord>,
    pub agents: Vec<AgentSummary>,
}

impl ScenarioTrace {
    pub fn summary(&self, name: &str) -> Option<&AgentSummary> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn payoffs(&self, name: &str) -> Vec<Ratio> {
        self.epochs.iter().filter_map(|e| e.agent(name).map(|a| a.stage_payoff.clone())).collect()
    }
}

pub(crate) struct RunOptions {
    pub horizon: u64,
    pub default_payoff: DefaultPayoff,
    pub overrides: Vec<(String, Strategy)>,
}

impl RunOptions {
    fn strategy_of(&self, name: &str, configured: Strategy) -> Strategy {
        self.overrides.iter().find(|(n, _)| n == name).map_or(configured, |(_, s)| *s)
    }
}

pub fn initial_state(config: &ScenarioConfig) -> SettlementState {
    let mut state = SettlementState::new(config.settlement.clone(), config.reward_pool);
    for b in &config.buyers {
        let p = &b.params;
        let terms = BuyerTerms {
            tx_rebate: p.tx_rebate,
            stake_reward: p.stake_reward,
            credit_reward: p.credit_reward,
            credit_penalty: p.credit_penalty,
        };
        state.buyers.push(BuyerAccount::new(ScenarioConfig::buyer_id(b), b.wallet, p.stake, p.credit_limit, terms));
    }
    for m in &config.merchants {
        state.merchants.push(MerchantAccount::new(
            ScenarioConfig::merchant_id(m),
            m.wallet,
            m.stake,
            m.params.stake_reward,
        ));
    }
    for g in &config.guarantors {
        state.guarantors.push(GuarantorAccount {
            id: ScenarioConfig::guarantor_id(g),
            wallet: g.wallet,
            locked: Amount::ZERO,
        });
    }
    state
}

fn tagged_hash(tag: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(tag);
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

fn tx_id(epoch: EpochIndex, buyer: &AgentId, index: usize) -> [u8; 32] {
    tagged_hash(b"micropay/tx", &[&epoch.0.to_be_bytes(), &buyer.bytes, &(index as u64).to_be_bytes()])
}

fn bid_nonce(epoch: EpochIndex, guarantor: &AgentId) -> [u8; 32] {
    tagged_hash(b"micropay/nonce", &[&epoch.0.to_be_bytes(), &guarantor.bytes])
}

fn restrict_buyer(p: &BuyerParams, keep: &[usize]) -> BuyerParams {
    BuyerParams { transactions: keep.iter().map(|&k| p.transactions[k].clone()).collect(), ..p.clone() }
}

fn restrict_merchant(p: &MerchantParams, keep: &[usize]) -> MerchantParams {
    MerchantParams { transactions: keep.iter().map(|&k| p.transactions[k].clone()).collect(), ..p.clone() }
}

fn buyer_payoff(
    p: &BuyerParams,
    traded: &[usize],
    conduct: Conduct,
    phase: PenaltyPhase,
    model: DefaultPayoff,
) -> Ratio {
    let ubar = p.conforming_utility();
    let offset = &ubar - buyer_utilities(p).conform;
    let u = buyer_utilities(&restrict_buyer(p, traded));
    let punished = phase.is_punished();
    match conduct {
        Conduct::Conform if punished => u.conform + offset - p.suspended_rewards(),
        Conduct::Conform => u.conform + offset,
        Conduct::Late if punished => u.late + offset - p.stake_reward.to_ratio(),
        Conduct::Late => u.late + offset,
        Conduct::Default => match model {
            DefaultPayoff::StageUtility => u.default + offset,
            DefaultPayoff::WorstCaseExposure => ubar + p.max_exposure.to_ratio() - p.stake.to_ratio(),
        },
    }
}

fn merchant_payoff(p: &MerchantParams, traded: &[usize], conduct: Conduct, phase: PenaltyPhase) -> Ratio {
    let restricted = restrict_merchant(p, traded);
    let u = merchant_utilities(&restricted);
    let withheld = if phase.is_punished() { restricted.suspended_rewards() } else { Ratio::zero() };
    match conduct {
        Conduct::Conform => u.conform - withheld,
        Conduct::Late => u.late - withheld,
        Conduct::Default => u.default,
    }
}

fn submit(ledger: &mut RootLedger, root: &MerkleRoot, at: u64) -> Result<(), SimError> {
    match ledger.submit_root(root, at) {
        Submission::Accepted => Ok(()),
        Submission::Rejected(reason) => Err(SimError::RootRejected { epoch: root.epoch, reason }),
    }
}

fn commit_tree(
    kind: RootKind,
    epoch: EpochIndex,
    leaves: &[LeafRecord],
) -> Result<(MerkleRoot, Option<MerkleTree>), SimError> {
    if leaves.is_empty() {
        return Ok((MerkleRoot::sentinel(kind, epoch), None));
    }
    let tree = MerkleTree::build(kind, epoch, leaves)?;
    Ok((tree.root(), Some(tree)))
}

/// Runs the auction for an over-limit request. Every guarantor that can
/// cover the stake lock and the deficit bids its true rate.
fn run_auction(
    config: &ScenarioConfig,
    state: &mut SettlementState,
    registry: &mut AuctionRegistry,
    events: &mut Vec<IntraEpochEvent>,
    auction_config: AuctionConfig,
) -> Result<AuctionSettlement, SimError> {
    let epoch = auction_config.epoch;
    let required = auction_config.required_stake;
    let deficit = auction_config.deficit;
    let mut auction = open_auction(registry, auction_config)?;
    let mut bidders = Vec::new();
    for g in &config.guarantors {
        let id = ScenarioConfig::guarantor_id(g);
        let wallet = state.guarantor(&id).map_or(Amount::ZERO, |a| a.wallet);
        if wallet < required.checked_add(deficit)? {
            continue;
        }
        let nonce = bid_nonce(epoch, &id);
        auction.commit_bid(id, bid_digest(g.rate, &nonce, &id), required)?;
        state.lock_guarantor_stake(&id, required)?;
        events.push(IntraEpochEvent::StakeLocked { guarantor: id, amount: required });
        bidders.push((id, g.rate, nonce));
    }
    auction.open_reveal()?;
    for (id, rate, nonce) in bidders {
        auction.reveal_bid(id, rate, nonce)?;
    }
    Ok(auction.settle()?)
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioTrace, SimError> {
    config.validate()?;
    run_with(
        config,
        &RunOptions { horizon: config.horizon, default_payoff: config.default_payoff, overrides: Vec::new() },
    )
}

pub(crate) fn run_with(config: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioTrace, SimError> {
    let mut state = initial_state(config);
    let mut ledger = RootLedger::new(LedgerConfig::default());
    let mut registry = AuctionRegistry::new();
    let mut history: Vec<PublicSignal> = Vec::new();
    let mut epochs = Vec::new();
    let risk = config.settlement.risk_bound.clone();

    let buyer_ids: Vec<AgentId> = config.buyers.iter().map(ScenarioConfig::buyer_id).collect();
    let merchant_ids: Vec<AgentId> = config.merchants.iter().map(ScenarioConfig::merchant_id).collect();
    let guarantor_ids: Vec<AgentId> = config.guarantors.iter().map(ScenarioConfig::guarantor_id).collect();

    for t in 0..opts.horizon {
        let epoch = EpochIndex(t);
        let merchant_choice: Vec<Option<Conduct>> = config
            .merchants
            .iter()
            .zip(&merchant_ids)
            .map(|(m, id)| {
                let alive = state.merchant(id).is_some_and(|a| a.alive);
                alive.then(|| opts.strategy_of(&m.name, m.strategy).choose(t, &history)).flatten()
            })
            .collect();

        let mut events = Vec::new();
        let mut dropped = Vec::new();
        let mut actions = Vec::new();
        let mut included: Vec<(Transaction, TxTerms)> = Vec::new();
        let mut auctions = Vec::new();
        let mut buyer_traded: Vec<Option<(Conduct, Vec<usize>)>> = vec![None; config.buyers.len()];

        for (bi, b) in config.buyers.iter().enumerate() {
            let id = buyer_ids[bi];
            if !state.buyer(&id).is_some_and(|a| a.alive) {
                continue;
            }
            let Some(conduct) = opts.strategy_of(&b.name, b.strategy).choose(t, &history) else { continue };
            let mi = config.merchant_index(&b.merchant).expect("validated");
            if merchant_choice[mi].is_none() {
                continue;
            }
            let merchant = merchant_ids[mi];
            let rows = &config.merchants[mi].params.transactions;
            let offset = config.row_offset(bi);
            let mut traded = Vec::new();
            for (k, entry) in b.params.transactions.iter().enumerate() {
                let account = state.buyer_mut(&id)?;
                let used_before = account.used_credit;
                let admitted = match authorize_payment(account, entry.payment, &risk)? {
                    Authorization::Approved => true,
                    Authorization::RejectedMisuse => {
                        events.push(IntraEpochEvent::MisuseFlagged { buyer: id });
                        dropped.push(DroppedTx { buyer: id, index: k, reason: DropReason::Misuse });
                        false
                    }
                    Authorization::OverLimit(deficit) => {
                        let cleared = match &config.auction {
                            Some(spec_a) if !registry.has_opened(&id, epoch) => {
                                let ac = AuctionConfig {
                                    buyer: id,
                                    merchant,
                                    deficit,
                                    cap: spec_a.cap,
                                    epoch,
                                    required_stake: spec_a.required_stake,
                                };
                                let settled = run_auction(config, &mut state, &mut registry, &mut events, ac)?;
                                let ok = matches!(settled.outcome, AuctionOutcome::Cleared(_));
                                auctions.push(settled);
                                ok
                            }
                            _ => false,
                        };
                        if !cleared {
                            state.buyer_mut(&id)?.used_credit = used_before;
                            dropped.push(DroppedTx { buyer: id, index: k, reason: DropReason::Unfunded });
                        }
                        cleared
                    }
                };
                if !admitted {
                    continue;
                }
                let row = &rows[offset + k];
                let tx =
                    Transaction::new(tx_id(epoch, &id, k), id, merchant, entry.payment, entry.service_value, epoch)?;
                let terms = TxTerms {
                    fee: row.fee,
                    fee_rebate: row.fee_rebate,
                    buyer_late_penalty: entry.late_penalty,
                    merchant_late_penalty: row.late_penalty,
                    merchant_default_penalty: row.default_penalty,
                };
                included.push((tx, terms));
                traded.push(k);
            }
            actions.push((id, Action::for_role(Role::Buyer, conduct).expect("buyer conduct")));
            buyer_traded[bi] = Some((conduct, traded));
        }
        for (mi, choice) in merchant_choice.iter().enumerate() {
            if let Some(c) = choice {
                actions.push((merchant_ids[mi], Action::for_role(Role::Merchant, *c).expect("merchant conduct")));
            }
        }

        // Commit the epoch's batches and prove every transaction.
        let tx_leaves: Vec<LeafRecord> = included.iter().map(|(tx, _)| LeafRecord::Tx(tx.clone())).collect();
        let credit_leaves: Vec<LeafRecord> = state
            .buyers
            .iter()
            .filter(|b| b.alive)
            .map(|b| {
                let remaining = b.credit_limit.checked_sub(b.used_credit)?.max(Amount::ZERO);
                Ok(LeafRecord::Credit(CreditRecord { agent: b.id, remaining, epoch }))
            })
            .collect::<Result<_, crate::money::ArithmeticError>>()?;
        let (tx_root, tx_tree) = commit_tree(RootKind::TxRoot, epoch, &tx_leaves)?;
        let (credit_root, _) = commit_tree(RootKind::CreditRoot, epoch, &credit_leaves)?;
        submit(&mut ledger, &tx_root, epoch.end_hour())?;
        submit(&mut ledger, &credit_root, epoch.end_hour())?;
        let mut transactions = Vec::with_capacity(included.len());
        for (i, (tx, terms)) in included.into_iter().enumerate() {
            let proof = tx_tree.as_ref().expect("non-empty batch").prove(i)?;
            transactions.push(ProvenTx { tx, proof, terms });
        }

        let input = EpochInput { epoch, actions, transactions, auctions };
        let before = state.clone();
        let (after, settlement) = settle_epoch(&state, &ledger, &input)?;

        // Stage payoffs.
        let mut agents = Vec::new();
        let mut merchant_traded: Vec<Vec<usize>> = vec![Vec::new(); config.merchants.len()];
        for (bi, b) in config.buyers.iter().enumerate() {
            let mi = config.merchant_index(&b.merchant).expect("validated");
            let offset = config.row_offset(bi);
            let prior = before.buyer(&buyer_ids[bi]).expect("roster");
            let acct = after.buyer(&buyer_ids[bi]).expect("roster");
            let (conduct, payoff) = match &buyer_traded[bi] {
                Some((c, traded)) => {
                    merchant_traded[mi].extend(traded.iter().map(|k| offset + k));
                    (Some(*c), buyer_payoff(&b.params, traded, *c, prior.phase, opts.default_payoff))
                }
                None => (None, Ratio::zero()),
            };
            agents.push(AgentEpoch {
                name: b.name.clone(),
                agent: buyer_ids[bi],
                conduct,
                stage_payoff: payoff,
                phase: acct.alive.then_some(acct.phase),
                trust: acct.trust,
                credit_limit: Some(acct.credit_limit),
                alive: acct.alive,
            });
        }
        for (mi, m) in config.merchants.iter().enumerate() {
            let prior = before.merchant(&merchant_ids[mi]).expect("roster");
            let acct = after.merchant(&merchant_ids[mi]).expect("roster");
            let payoff = match merchant_choice[mi] {
                Some(c) => {
                    merchant_traded[mi].sort_unstable();
                    merchant_payoff(&m.params, &merchant_traded[mi], c, prior.phase)
                }
                None => Ratio::zero(),
            };
            agents.push(AgentEpoch {
                name: m.name.clone(),
                agent: merchant_ids[mi],
                conduct: merchant_choice[mi],
                stage_payoff: payoff,
                phase: acct.alive.then_some(acct.phase),
                trust: acct.trust,
                credit_limit: None,
                alive: acct.alive,
            });
        }
        for (gi, g) in config.guarantors.iter().enumerate() {
            let id = guarantor_ids[gi];
            // Change in wallet plus locked stake over the epoch.
            let funds =
                |s: &SettlementState| s.guarantor(&id).map_or(Ok(Amount::ZERO), |a| a.wallet.checked_add(a.locked));
            let (start, end) = (funds(&before)?, funds(&after)?);
            agents.push(AgentEpoch {
                name: g.name.clone(),
                agent: id,
                conduct: None,
                stage_payoff: end.to_ratio() - start.to_ratio(),
                phase: None,
                trust: 0,
                credit_limit: None,
                alive: true,
            });
        }

        history.push(settlement.signal.clone());
        epochs.push(EpochRecord { epoch, events, dropped, tx_root, credit_root, input, settlement, agents });
        state = after;
    }

    let agents = summarize(&epochs, &config.discount, opts.horizon);
    Ok(ScenarioTrace {
        name: config.name.clone(),
        horizon: opts.horizon,
        discount: config.discount.clone(),
        epochs,
        agents,
    })
}

fn summarize(epochs: &[EpochRecord], discount: &Ratio, horizon: u64) -> Vec<AgentSummary> {
    let Some(first) = epochs.first() else { return Vec::new() };
    let one = Ratio::one();
    first
        .agents
        .iter()
        .map(|a| {
            let mut total = Ratio::zero();
            let mut weight = Ratio::one();
            let mut max_abs = Ratio::zero();
            for e in epochs {
                let u = &e.agent(&a.name).expect("stable roster").stage_payoff;
                total = total + &weight * u;
                weight = weight * discount;
                let abs = if u.is_negative() { -u.clone() } else { u.clone() };
                if abs > max_abs {
                    max_abs = abs;
                }
            }
            let tail_bound = discount.pow(horizon as u32) * max_abs / (&one - discount);
            AgentSummary { name: a.name.clone(), agent: a.agent, discounted_payoff: total, tail_bound }
        })
        .collect()
}
