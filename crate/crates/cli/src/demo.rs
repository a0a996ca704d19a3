//! `merkle`, `auction` and `costmodel` subcommands.

use std::path::Path;

use micropay::auction::{
    bid_digest, open_auction, AuctionConfig, AuctionRegistry, AuctionSettlement, RevealVerdict, StakeDisposition,
};
use micropay::commitment::{verify_inclusion, InclusionProof, LeafRecord, MerkleRoot, MerkleTree, RootKind};
use micropay::costmodel::{cost_model, CostModelReport};
use micropay::model::{AgentId, EpochIndex, Role};
use micropay::money::{Amount, Rate};
use serde::{Deserialize, Serialize};

use crate::input::{input_err, parse_file, CliError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltRoot {
    pub root: MerkleRoot,
    pub leaf_count: usize,
    pub sentinel: bool,
}

fn load_leaves(path: &Path) -> Result<Vec<LeafRecord>, CliError> {
    parse_file(path)
}

fn batch_shape(leaves: &[LeafRecord], kind: Option<RootKind>, path: &Path) -> Result<(RootKind, EpochIndex), CliError> {
    let Some(first) = leaves.first() else {
        let kind = kind.ok_or_else(|| input_err(format!("{}: empty batch needs --kind", path.display())))?;
        return Ok((kind, EpochIndex(0)));
    };
    let leaf_kind = |l: &LeafRecord| match l {
        LeafRecord::Tx(_) => RootKind::TxRoot,
        LeafRecord::Credit(_) => RootKind::CreditRoot,
    };
    let inferred = leaf_kind(first);
    if leaves.iter().any(|l| leaf_kind(l) != inferred || l.epoch() != first.epoch()) {
        return Err(input_err(format!("{}: leaves must share one kind and one epoch", path.display())));
    }
    if kind.is_some_and(|k| k != inferred) {
        return Err(input_err(format!("{}: --kind disagrees with the leaf records", path.display())));
    }
    Ok((inferred, first.epoch()))
}

pub fn merkle_build(path: &Path, kind: Option<RootKind>, epoch: Option<u64>) -> Result<BuiltRoot, CliError> {
    let leaves = load_leaves(path)?;
    let (kind, leaf_epoch) = batch_shape(&leaves, kind, path)?;
    let epoch = epoch.map_or(leaf_epoch, EpochIndex);
    if leaves.is_empty() {
        let root = MerkleRoot::sentinel(kind, epoch);
        return Ok(BuiltRoot { root, leaf_count: 0, sentinel: true });
    }
    let tree = MerkleTree::build(kind, leaf_epoch, &leaves).map_err(|e| input_err(e.to_string()))?;
    Ok(BuiltRoot { root: tree.root(), leaf_count: leaves.len(), sentinel: false })
}

pub fn merkle_prove(path: &Path, index: usize) -> Result<InclusionProof, CliError> {
    let leaves = load_leaves(path)?;
    let (kind, epoch) = batch_shape(&leaves, None, path)?;
    let tree = MerkleTree::build(kind, epoch, &leaves).map_err(|e| input_err(e.to_string()))?;
    tree.prove(index).map_err(|e| input_err(e.to_string()))
}

pub fn parse_digest(hex_root: &str) -> Result<[u8; 32], CliError> {
    let bytes = hex::decode(hex_root).map_err(|e| input_err(format!("root: {e}")))?;
    bytes.try_into().map_err(|_| input_err("root: expected 32 bytes (64 hex characters)"))
}

/// Checks `leaf` against a root given by digest; kind and epoch come from
/// the proof's root reference.
pub fn merkle_verify(leaf: &Path, proof: &Path, root_hex: &str) -> Result<bool, CliError> {
    let leaf: LeafRecord = parse_file(leaf)?;
    let proof: InclusionProof = parse_file(proof)?;
    let root = MerkleRoot { digest: parse_digest(root_hex)?, kind: proof.root.kind, epoch: proof.root.epoch };
    Ok(verify_inclusion(&root, &leaf, &proof))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedBid {
    pub guarantor: String,
    pub rate: Rate,
    pub stake: Amount,
    /// Rate opened in the reveal phase; defaults to the committed rate.
    #[serde(default)]
    pub reveal_rate: Option<Rate>,
    #[serde(default = "yes")]
    pub reveal: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionScript {
    pub buyer: String,
    pub merchant: String,
    pub deficit: Amount,
    pub cap: Rate,
    #[serde(default)]
    pub epoch: u64,
    pub required_stake: Amount,
    pub bids: Vec<ScriptedBid>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedVerdict {
    pub guarantor: String,
    pub id: AgentId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<RevealVerdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionRun {
    pub bids: Vec<NamedVerdict>,
    pub settlement: AuctionSettlement,
}

fn nonce_for(name: &str) -> [u8; 32] {
    AgentId::derive(Role::Guarantor, &format!("nonce/{name}")).bytes
}

pub fn auction_run(path: &Path) -> Result<AuctionRun, CliError> {
    let script: AuctionScript = parse_file(path)?;
    let fail = |e: micropay::auction::AuctionError| input_err(format!("{}: {e}", path.display()));
    let mut registry = AuctionRegistry::new();
    let mut auction = open_auction(
        &mut registry,
        AuctionConfig {
            buyer: AgentId::derive(Role::Buyer, &script.buyer),
            merchant: AgentId::derive(Role::Merchant, &script.merchant),
            deficit: script.deficit,
            cap: script.cap,
            epoch: EpochIndex(script.epoch),
            required_stake: script.required_stake,
        },
    )
    .map_err(fail)?;
    let mut bids = Vec::new();
    for b in &script.bids {
        let id = AgentId::derive(Role::Guarantor, &b.guarantor);
        auction.commit_bid(id, bid_digest(b.rate, &nonce_for(&b.guarantor), &id), b.stake).map_err(fail)?;
    }
    auction.open_reveal().map_err(fail)?;
    for b in &script.bids {
        let id = AgentId::derive(Role::Guarantor, &b.guarantor);
        let verdict = if b.reveal {
            Some(auction.reveal_bid(id, b.reveal_rate.unwrap_or(b.rate), nonce_for(&b.guarantor)).map_err(fail)?)
        } else {
            None
        };
        bids.push(NamedVerdict { guarantor: b.guarantor.clone(), id, verdict });
    }
    let settlement = auction.settle().map_err(fail)?;
    Ok(AuctionRun { bids, settlement })
}

pub fn render_auction(run: &AuctionRun) -> String {
    let name_of =
        |id: &AgentId| run.bids.iter().find(|b| b.id == *id).map_or_else(|| id.short(), |b| b.guarantor.clone());
    let mut s = String::new();
    for b in &run.bids {
        let v = match b.verdict {
            None => "not revealed".to_string(),
            Some(RevealVerdict::Valid) => "valid".to_string(),
            Some(RevealVerdict::Invalid(r)) => format!("invalid ({r:?})"),
        };
        s.push_str(&format!("  {}: {v}\n", b.guarantor));
    }
    match &run.settlement.outcome {
        micropay::auction::AuctionOutcome::Cleared(c) => s.push_str(&format!(
            "cleared: winner {} at {} ({}), deficit {}, repayment {}\n",
            name_of(&c.winner),
            c.clearing_rate,
            percent(c.clearing_rate),
            c.deficit,
            c.repayment
        )),
        micropay::auction::AuctionOutcome::Failed(r) => s.push_str(&format!("failed: {r:?}\n")),
    }
    for (id, d) in &run.settlement.stakes {
        let (what, amount) = match d {
            StakeDisposition::Released(a) => ("released", a),
            StakeDisposition::Slashed(a) => ("slashed", a),
        };
        s.push_str(&format!("  stake {}: {what} {amount}\n", name_of(id)));
    }
    s
}

fn percent(rate: Rate) -> String {
    format!("{}.{:04}%", rate.ppm() / 10_000, rate.ppm() % 10_000)
}

pub fn costmodel(batches: &[usize]) -> Result<CostModelReport, CliError> {
    cost_model(batches).map_err(|e| input_err(e.to_string()))
}

pub fn render_costmodel(r: &CostModelReport) -> String {
    let mut s = format!(
        "commitment message: {} bytes; reported gas is from a deployed prototype, not measured here\n",
        r.message_len
    );
    s.push_str(&format!(
        "{:>6} {:>12} {:>6} {:>5} {:>7} {:>12} {:>12} {:>9}\n",
        "batch", "leaf_bytes", "proof", "msgs", "bytes", "txroot_gas", "credit_gas", "saving%"
    ));
    for row in &r.rows {
        let (tx, credit, save) = match row.reference {
            Some(g) => (
                g.tx_root_gas.to_string(),
                g.credit_root_gas.to_string(),
                format!("{}.{:02}", g.savings_bp / 100, g.savings_bp % 100),
            ),
            None => ("-".into(), "-".into(), "-".into()),
        };
        s.push_str(&format!(
            "{:>6} {:>12} {:>6} {:>5} {:>7} {:>12} {:>12} {:>9}\n",
            row.batch_size,
            row.offchain_leaf_bytes,
            row.max_proof_len,
            row.commitment_messages,
            row.commitment_bytes,
            tx,
            credit,
            save
        ));
    }
    s
}
