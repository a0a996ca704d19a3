//! `check`: incentive conditions for a merchant or buyer parameter file.

use std::collections::BTreeSet;
use std::path::Path;

use clap::ValueEnum;
use micropay::incentives::{
    check_buyer_conditions, check_merchant_conditions, delta_threshold, suspension_loss, verify_buyer_ppe,
    verify_merchant_ppe, BuyerParams, IncentiveError, IncentiveReport, MerchantParams, SuspensionLoss,
};
use micropay::money::Ratio;
use serde::{Deserialize, Serialize};

use crate::input::{input_err, parse_str, read_text, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    Merchant,
    Buyer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutput {
    pub role: ParamRole,
    pub report: IncentiveReport,
    /// Conforming is a perfect public equilibrium.
    pub equilibrium: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suspension_loss: Option<SuspensionLoss>,
    /// Smallest deterring discount factor; absent when none exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_threshold: Option<Ratio>,
    pub passed: bool,
}

const MERCHANT_KEYS: &[&str] =
    &["exec_cap", "punishment_epochs", "loss_floor", "fee", "exec_cost", "fee_rebate", "default_penalty"];
const BUYER_KEYS: &[&str] = &[
    "tx_rebate",
    "financing_cost",
    "credit_reward",
    "credit_penalty",
    "credit_limit",
    "stake",
    "conversion",
    "max_exposure",
    "conforming_utility",
    "opportunity_rate",
    "service_value",
];

fn guess_role(text: &str, origin: &Path) -> Result<ParamRole, CliError> {
    let value: serde_json::Value = parse_str(text, origin)?;
    let mut keys = BTreeSet::new();
    if let Some(obj) = value.as_object() {
        keys.extend(obj.keys().cloned());
        if let Some(rows) = obj.get("transactions").and_then(|t| t.as_array()) {
            for row in rows.iter().filter_map(|r| r.as_object()) {
                keys.extend(row.keys().cloned());
            }
        }
    }
    let merchant = MERCHANT_KEYS.iter().any(|k| keys.contains(*k));
    let buyer = BUYER_KEYS.iter().any(|k| keys.contains(*k));
    match (merchant, buyer) {
        (true, false) => Ok(ParamRole::Merchant),
        (false, true) => Ok(ParamRole::Buyer),
        _ => Err(input_err(format!(
            "{}: cannot tell whether these are merchant or buyer parameters; pass --role",
            origin.display()
        ))),
    }
}

fn incentive_err(origin: &Path, e: IncentiveError) -> CliError {
    input_err(format!("{}: {e}", origin.display()))
}

pub fn evaluate(path: &Path, role: Option<ParamRole>) -> Result<CheckOutput, CliError> {
    let text = read_text(path)?;
    let role = match role {
        Some(r) => r,
        None => guess_role(&text, path)?,
    };
    Ok(match role {
        ParamRole::Merchant => {
            let p: MerchantParams = parse_str(&text, path)?;
            let report = check_merchant_conditions(&p);
            let loss =
                suspension_loss(&p.discount, p.punishment_epochs, p.loss_floor).map_err(|e| incentive_err(path, e))?;
            CheckOutput {
                role,
                passed: report.all_hold(),
                equilibrium: verify_merchant_ppe(&p),
                report,
                suspension_loss: Some(loss),
                delta_threshold: None,
            }
        }
        ParamRole::Buyer => {
            let p: BuyerParams = parse_str(&text, path)?;
            let report = check_buyer_conditions(&p).map_err(|e| incentive_err(path, e))?;
            let equilibrium = verify_buyer_ppe(&p).map_err(|e| incentive_err(path, e))?;
            let threshold = match delta_threshold(p.max_exposure, p.stake, &p.conforming_utility()) {
                Ok(t) => Some(t.value),
                Err(IncentiveError::NoDeterrence) => None,
                Err(e) => return Err(incentive_err(path, e)),
            };
            CheckOutput {
                role,
                passed: report.all_hold(),
                equilibrium,
                report,
                suspension_loss: None,
                delta_threshold: threshold,
            }
        }
    })
}

pub fn render(out: &CheckOutput) -> String {
    let mut s = String::new();
    let u = &out.report.utilities;
    let role = match out.role {
        ParamRole::Merchant => "merchant",
        ParamRole::Buyer => "buyer",
    };
    s.push_str(&format!("{role} stage utilities: conform {} | late {} | default {}\n", u.conform, u.late, u.default));
    for c in &out.report.conditions {
        let kind = match c.strictness {
            micropay::incentives::Strictness::Strict => "strict",
            micropay::incentives::Strictness::Weak => "weak",
        };
        s.push_str(&format!("  {}: {} ({kind}, margin {})\n", c.id, c.verdict(), c.margin));
    }
    if let Some(loss) = &out.suspension_loss {
        s.push_str(&format!("suspension loss: {} (direct sum {})\n", loss.bound, loss.exact_sum));
    }
    if out.role == ParamRole::Buyer {
        match &out.delta_threshold {
            Some(t) => s.push_str(&format!("discount threshold: {t} (~{:.6})\n", t.to_f64())),
            None => s.push_str("discount threshold: none, no discount factor deters default\n"),
        }
    }
    s.push_str(&format!("conforming equilibrium: {}\n", if out.equilibrium { "yes" } else { "no" }));
    s.push_str(if out.passed { "result: PASS\n" } else { "result: FAIL\n" });
    s
}
