use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{run_with, RunOptions};
use super::{DefaultPayoff, ScenarioConfig, SimError, Strategy};
use crate::incentives::{delta_threshold, IncentiveError};
use crate::model::Conduct;
use crate::money::Ratio;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationGain {
    pub conduct: Conduct,
    /// Discounted payoff of deviating once minus that of conforming,
    /// measured from the deviation epoch.
    pub gain: Ratio,
}

/// Epochs simulated past the deviation so both paths are back in the
/// same stationary regime before the analytic tail takes over.
fn scan_horizon(config: &ScenarioConfig, epoch: u64) -> u64 {
    let settle = u64::from(config.settlement.punishment_epochs) + u64::from(config.settlement.recovery_levels);
    config.horizon.max(epoch + settle + 3)
}

fn equilibrium_path(config: &ScenarioConfig) -> Vec<(String, Strategy)> {
    config
        .buyers
        .iter()
        .map(|b| b.name.clone())
        .chain(config.merchants.iter().map(|m| m.name.clone()))
        .map(|n| (n, Strategy::GrimConform))
        .collect()
}

/// Gain of one deviation by `agent` at `epoch`, everyone else on the
/// conforming path. Buyer defaults are valued at the worst-case exposure.
pub fn deviation_gain(config: &ScenarioConfig, agent: &str, epoch: u64, conduct: Conduct) -> Result<Ratio, SimError> {
    config.validate()?;
    if !config.buyers.iter().any(|b| b.name == agent) && !config.merchants.iter().any(|m| m.name == agent) {
        return Err(SimError::UnknownAgent(agent.to_string()));
    }
    if epoch >= config.horizon {
        return Err(SimError::EpochOutOfRange { epoch, horizon: config.horizon });
    }
    let horizon = scan_horizon(config, epoch);
    let base_opts =
        RunOptions { horizon, default_payoff: DefaultPayoff::WorstCaseExposure, overrides: equilibrium_path(config) };
    let mut dev_overrides = equilibrium_path(config);
    for (name, s) in dev_overrides.iter_mut() {
        if name == agent {
            *s = Strategy::DeviateOnce { epoch, conduct };
        }
    }
    let dev_opts = RunOptions { horizon, default_payoff: DefaultPayoff::WorstCaseExposure, overrides: dev_overrides };

    let base = run_with(config, &base_opts)?.payoffs(agent);
    let dev = run_with(config, &dev_opts)?.payoffs(agent);

    let delta = &config.discount;
    let mut gain = Ratio::zero();
    let mut weight = Ratio::one();
    for t in epoch as usize..horizon as usize {
        gain = gain + &weight * (&dev[t] - &base[t]);
        weight = weight * delta;
    }
    // Beyond the horizon both paths are stationary; the difference of
    // their last stage payoffs continues forever.
    let last = horizon as usize - 1;
    gain = gain + weight * (&dev[last] - &base[last]) / (Ratio::one() - delta);
    Ok(gain)
}

/// Gains of every alternative action at `epoch` for `agent`.
pub fn one_shot_deviation_scan(
    config: &ScenarioConfig,
    agent: &str,
    epoch: u64,
) -> Result<Vec<DeviationGain>, SimError> {
    [Conduct::Late, Conduct::Default]
        .into_iter()
        .map(|conduct| Ok(DeviationGain { conduct, gain: deviation_gain(config, agent, epoch, conduct)? }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub discount: Ratio,
    pub default_gain: Ratio,
    pub best_response: Conduct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepResult {
    pub agent: String,
    pub step: Ratio,
    pub points: Vec<SweepPoint>,
    /// Smallest grid discount at which conforming is a best response to
    /// the option of defaulting at epoch 0.
    pub empirical_threshold: Option<Ratio>,
    /// `None` when no discount factor below one deters default.
    pub analytic_threshold: Option<Ratio>,
}

/// Scans a grid `0, step, 2·step, … < 1` of discount factors.
pub fn sweep_delta(config: &ScenarioConfig, agent: &str, step: &Ratio) -> Result<SweepResult, SimError> {
    if !step.is_positive() {
        return Err(SimError::InvalidConfig(format!("grid step must be positive, got {step}")));
    }
    let buyer =
        config.buyers.iter().find(|b| b.name == agent).ok_or_else(|| SimError::UnknownAgent(agent.to_string()))?;
    let mut grid = Vec::new();
    let mut d = Ratio::zero();
    while d < Ratio::one() {
        grid.push(d.clone());
        d = d + step;
    }
    let points = grid
        .into_par_iter()
        .map(|discount| {
            let cfg = ScenarioConfig { discount: discount.clone(), ..config.clone() };
            let gain = deviation_gain(&cfg, agent, 0, Conduct::Default)?;
            let best_response = if gain.is_positive() { Conduct::Default } else { Conduct::Conform };
            Ok(SweepPoint { discount, default_gain: gain, best_response })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let empirical_threshold = points.iter().find(|p| p.best_response == Conduct::Conform).map(|p| p.discount.clone());
    let p = &buyer.params;
    let analytic_threshold = match delta_threshold(p.max_exposure, p.stake, &p.conforming_utility()) {
        Ok(t) => Some(t.value),
        Err(IncentiveError::NoDeterrence) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(SweepResult { agent: agent.to_string(), step: step.clone(), points, empirical_threshold, analytic_threshold })
}
