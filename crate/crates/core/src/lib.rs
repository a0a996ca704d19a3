//! Credit-based micropayments settled in discrete epochs.
//!
//! - [`money`]: fixed-point amounts, rates and exact rationals.
//! - [`model`]: agents, actions, transactions and public signals.
//! - [`commitment`]: Merkle batching, inclusion proofs and the root ledger.
//! - [`settlement`]: credit authorization and the epoch settlement state machine.
//! - [`auction`]: commit–reveal reverse Vickrey auction for over-limit credit.
//! - [`incentives`]: exact stage utilities and incentive conditions.
//! - [`sim`]: repeated-game simulator, deviation scans and discount sweeps.
//! - [`costmodel`]: on-chain versus off-chain commitment bytes.

pub mod auction;
pub mod commitment;
pub mod costmodel;
pub mod incentives;
pub mod model;
pub mod money;
pub mod settlement;
pub mod sim;
