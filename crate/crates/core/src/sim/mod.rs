//! Repeated-game simulator over the settlement state machine.
//!
//! Agents follow public strategies; every epoch runs authorization, the
//! over-limit auction, batch commitment and settlement, then records exact
//! stage payoffs. Deviation scans compare a single deviation against the
//! conforming path with an analytic infinite tail.

mod config;
mod engine;
mod export;
mod scan;
mod strategy;

use thiserror::Error;

use crate::auction::AuctionError;
use crate::commitment::{CommitmentError, RejectReason};
use crate::incentives::IncentiveError;
use crate::model::{EpochIndex, ModelError};
use crate::money::ArithmeticError;
use crate::settlement::SettlementError;

pub use config::{
    AuctionTerms, BuyerEntry, DefaultPayoff, GuarantorEntry, MerchantEntry, ScenarioConfig, SCENARIO_VERSION,
};
pub use engine::{
    initial_state, run_scenario, AgentEpoch, AgentSummary, DropReason, DroppedTx, EpochRecord, IntraEpochEvent,
    ScenarioTrace,
};
pub use export::{replay_signals, write_trace_csv, write_trace_json};
pub use scan::{deviation_gain, one_shot_deviation_scan, sweep_delta, DeviationGain, SweepPoint, SweepResult};
pub use strategy::Strategy;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("no agent named {0:?}")]
    UnknownAgent(String),
    #[error("deviation epoch {epoch} is not below the horizon {horizon}")]
    EpochOutOfRange { epoch: u64, horizon: u64 },
    #[error("root for {epoch} rejected: {reason:?}")]
    RootRejected { epoch: EpochIndex, reason: RejectReason },
    #[error("export failed: {0}")]
    Export(String),
    #[error(transparent)]
    Settlement(#[from] SettlementError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Commitment(#[from] CommitmentError),
    #[error(transparent)]
    Incentive(#[from] IncentiveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
}
