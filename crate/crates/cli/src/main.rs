//! Command-line front end for the micropayment settlement toolkit.
//!
//! Exit codes: 0 success, 1 a checked condition does not hold, 2 bad
//! input or usage.

mod check;
mod demo;
mod input;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use micropay::commitment::RootKind;
use micropay::model::Conduct;
use micropay::money::Ratio;
use micropay::sim::{run_scenario, sweep_delta, write_trace_csv, write_trace_json, ScenarioConfig, SweepResult};
use serde::Serialize;

use crate::check::ParamRole;
use crate::input::{input_err, parse_file, CliError};

#[derive(Debug, Parser)]
#[command(name = "micropay", version, about = "Epoch-based credit micropayments: incentives, settlement, simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate stage utilities and incentive conditions for a parameter file.
    Check {
        params: PathBuf,
        /// Parameter set to read; guessed from the field names when omitted.
        #[arg(long, value_enum)]
        role: Option<ParamRole>,
        #[arg(long)]
        json: bool,
    },
    /// Run a scenario and export its trace.
    Simulate {
        scenario: PathBuf,
        /// Override the scenario horizon (epochs, at least 1).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        horizon: Option<u64>,
        #[arg(long, value_enum, default_value_t = TraceFormat::Csv)]
        out: TraceFormat,
        /// Write to a file instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Sweep discount factors and compare the empirical default threshold
    /// with the analytic one.
    Sweep {
        scenario: PathBuf,
        /// Buyer to scan; defaults to the first buyer of the scenario.
        #[arg(long)]
        agent: Option<String>,
        /// Grid step, as a decimal ("0.01") or a fraction ("1/100").
        #[arg(long, default_value = "1/100")]
        step: Ratio,
        #[arg(long)]
        json: bool,
    },
    /// Build roots, proofs and verify inclusion for a batch of leaf records.
    Merkle {
        #[command(subcommand)]
        command: MerkleCommand,
    },
    /// Run a scripted over-limit auction.
    Auction {
        #[command(subcommand)]
        command: AuctionCommand,
    },
    /// Off-chain versus on-chain commitment bytes per batch size.
    Costmodel {
        #[arg(long, num_args = 1.., default_values_t = [1usize, 100, 200, 300, 400, 500])]
        batch: Vec<usize>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Subcommand)]
enum MerkleCommand {
    /// Print the root of a JSON array of leaf records.
    Build {
        leaves: PathBuf,
        /// Root kind; required for an empty batch.
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        /// Epoch of an empty batch.
        #[arg(long)]
        epoch: Option<u64>,
    },
    /// Print the inclusion proof of one leaf.
    Prove {
        leaves: PathBuf,
        #[arg(long)]
        index: usize,
    },
    /// Verify a leaf against a proof and a root digest.
    Verify {
        #[arg(long)]
        leaf: PathBuf,
        #[arg(long)]
        proof: PathBuf,
        /// Root digest in hex.
        #[arg(long)]
        root: String,
    },
}

#[derive(Debug, Subcommand)]
enum AuctionCommand {
    /// Commit, reveal and settle the bids of a script file.
    Run {
        script: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TraceFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Tx,
    Credit,
}

impl From<KindArg> for RootKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Tx => RootKind::TxRoot,
            KindArg::Credit => RootKind::CreditRoot,
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| input_err(e.to_string()))?;
    emit(&format!("{text}\n"));
    Ok(())
}

/// Writes to stdout. A closed pipe, as in `| head`, ends output quietly.
fn emit(text: &str) {
    let mut out = io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn passed(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    let config: ScenarioConfig = parse_file(path)?;
    config.validate().map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    Ok(config)
}

fn simulate(path: &Path, horizon: Option<u64>, format: TraceFormat, output: Option<&Path>) -> Result<(), CliError> {
    let mut config = load_scenario(path)?;
    if let Some(h) = horizon {
        config.horizon = h;
    }
    let trace = run_scenario(&config).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    let sink: Box<dyn Write> = match output {
        Some(p) => Box::new(File::create(p).map_err(|e| input_err(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    };
    let written = match format {
        TraceFormat::Csv => write_trace_csv(&trace, sink),
        TraceFormat::Json => write_trace_json(&trace, sink),
    };
    written.map_err(|e| input_err(e.to_string()))
}

/// The empirical threshold sits within one grid step above the analytic
/// one, or neither exists.
fn sweep_agrees(r: &SweepResult) -> bool {
    match (&r.empirical_threshold, &r.analytic_threshold) {
        (Some(e), Some(a)) => e >= a && (e - a) <= r.step,
        (None, None) => true,
        // The grid stops below one, so a threshold in the last step may not
        // be reached.
        (None, Some(a)) => (Ratio::one() - a) <= r.step,
        (Some(_), None) => false,
    }
}

fn render_sweep(r: &SweepResult) -> String {
    let mut s =
        format!("agent {}, step {}\n{:>10} {:>16} {:>8}\n", r.agent, r.step, "discount", "default_gain", "best");
    for p in &r.points {
        let best = match p.best_response {
            Conduct::Conform => "conform",
            Conduct::Late => "late",
            Conduct::Default => "default",
        };
        s.push_str(&format!("{:>10.4} {:>16.6} {:>8}\n", p.discount.to_f64(), p.default_gain.to_f64(), best));
    }
    let show = |t: &Option<Ratio>| match t {
        Some(t) => format!("{t} (~{:.6})", t.to_f64()),
        None => "none".to_string(),
    };
    s.push_str(&format!("analytic threshold: {}\n", show(&r.analytic_threshold)));
    s.push_str(&format!("empirical threshold: {}\n", show(&r.empirical_threshold)));
    s.push_str(&format!("within one grid step: {}\n", if sweep_agrees(r) { "yes" } else { "no" }));
    s
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Check { params, role, json } => {
            let out = check::evaluate(&params, role)?;
            if json {
                print_json(&out)?;
            } else {
                emit(&check::render(&out));
            }
            Ok(passed(out.passed))
        }
        Command::Simulate { scenario, horizon, out, output } => {
            simulate(&scenario, horizon, out, output.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { scenario, agent, step, json } => {
            if !step.is_positive() || step >= Ratio::one() {
                return Err(input_err(format!("--step must lie in (0, 1), got {step}")));
            }
            let config = load_scenario(&scenario)?;
            let agent = match agent {
                Some(a) => a,
                None => {
                    config.buyers.first().map(|b| b.name.clone()).ok_or_else(|| input_err("scenario has no buyers"))?
                }
            };
            let result = sweep_delta(&config, &agent, &step).map_err(|e| input_err(e.to_string()))?;
            if json {
                print_json(&result)?;
            } else {
                emit(&render_sweep(&result));
            }
            Ok(passed(sweep_agrees(&result)))
        }
        Command::Merkle { command } => match command {
            MerkleCommand::Build { leaves, kind, epoch } => {
                print_json(&demo::merkle_build(&leaves, kind.map(Into::into), epoch)?)?;
                Ok(ExitCode::SUCCESS)
            }
            MerkleCommand::Prove { leaves, index } => {
                print_json(&demo::merkle_prove(&leaves, index)?)?;
                Ok(ExitCode::SUCCESS)
            }
            MerkleCommand::Verify { leaf, proof, root } => {
                let ok = demo::merkle_verify(&leaf, &proof, &root)?;
                emit(if ok { "valid\n" } else { "invalid\n" });
                Ok(passed(ok))
            }
        },
        Command::Auction { command: AuctionCommand::Run { script, json } } => {
            let run = demo::auction_run(&script)?;
            if json {
                print_json(&run)?;
            } else {
                emit(&demo::render_auction(&run));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Costmodel { batch, json } => {
            let report = demo::costmodel(&batch)?;
            if json {
                print_json(&report)?;
            } else {
                emit(&demo::render_costmodel(&report));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
