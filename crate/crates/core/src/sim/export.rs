use std::io::Write;

use serde::Serialize;

use super::engine::{initial_state, IntraEpochEvent, ScenarioTrace};
use super::{ScenarioConfig, SimError};
use crate::commitment::{LedgerConfig, RootLedger, Submission};
use crate::model::{PublicSignal, Role, SignalStatus};
use crate::money::Amount;
use crate::settlement::{settle_epoch, PenaltyPhase};

/// One CSV row: one agent in one epoch.
#[derive(Debug, Serialize)]
struct TraceRow<'a> {
    epoch: u64,
    agent: &'a str,
    id: String,
    role: Role,
    conduct: String,
    signal: String,
    stage_payoff: String,
    phase: String,
    trust: u32,
    credit_limit: String,
    wallet_delta: String,
    stake_delta: String,
    rewards: String,
    penalties: String,
    alive: bool,
}

fn phase_label(phase: Option<PenaltyPhase>) -> String {
    match phase {
        None => String::new(),
        Some(PenaltyPhase::Normal) => "normal".into(),
        Some(PenaltyPhase::Punishment(k)) => format!("punishment({k})"),
        Some(PenaltyPhase::Recovery(l)) => format!("recovery({l})"),
    }
}

fn status_label(status: Option<SignalStatus>) -> String {
    status
        .map(|s| serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default())
        .unwrap_or_default()
}

pub fn write_trace_csv<W: Write>(trace: &ScenarioTrace, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for e in &trace.epochs {
        for a in &e.agents {
            let outcome = e.settlement.outcome_of(&a.agent);
            let delta = e.settlement.flows.delta_of(&a.agent);
            let row = TraceRow {
                epoch: e.epoch.0,
                agent: &a.name,
                id: hex::encode(a.agent.bytes),
                role: a.agent.role,
                conduct: a.conduct.map(|c| format!("{c:?}").to_lowercase()).unwrap_or_default(),
                signal: status_label(e.settlement.signal.status_of(&a.agent)),
                stage_payoff: a.stage_payoff.to_string(),
                phase: phase_label(a.phase),
                trust: a.trust,
                credit_limit: a.credit_limit.map(|c| c.to_string()).unwrap_or_default(),
                wallet_delta: delta.map_or(Amount::ZERO, |d| d.wallet).to_string(),
                stake_delta: delta.map_or(Amount::ZERO, |d| d.stake).to_string(),
                rewards: outcome.map_or(Amount::ZERO, |o| o.rewards).to_string(),
                penalties: outcome.map_or(Amount::ZERO, |o| o.penalties).to_string(),
                alive: a.alive,
            };
            w.serialize(row).map_err(|e| SimError::Export(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| SimError::Export(e.to_string()))?;
    Ok(())
}

pub fn write_trace_json<W: Write>(trace: &ScenarioTrace, out: W) -> Result<(), SimError> {
    serde_json::to_writer_pretty(out, trace).map_err(|e| SimError::Export(e.to_string()))
}

/// Re-runs settlement on the recorded inputs and returns the signals it
/// produces, which must equal the recorded ones.
pub fn replay_signals(config: &ScenarioConfig, trace: &ScenarioTrace) -> Result<Vec<PublicSignal>, SimError> {
    let mut state = initial_state(config);
    let mut ledger = RootLedger::new(LedgerConfig::default());
    let mut signals = Vec::new();
    for record in &trace.epochs {
        for event in &record.events {
            match event {
                IntraEpochEvent::StakeLocked { guarantor, amount } => state.lock_guarantor_stake(guarantor, *amount)?,
                IntraEpochEvent::MisuseFlagged { buyer } => state.buyer_mut(buyer)?.misuse_flags += 1,
            }
        }
        for root in [&record.tx_root, &record.credit_root] {
            if let Submission::Rejected(reason) = ledger.submit_root(root, record.epoch.end_hour()) {
                return Err(SimError::RootRejected { epoch: record.epoch, reason });
            }
        }
        let (next, settlement) = settle_epoch(&state, &ledger, &record.input)?;
        signals.push(settlement.signal);
        state = next;
    }
    Ok(signals)
}
