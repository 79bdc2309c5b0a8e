use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use twoprice::reproduce::reproduce;
use twoprice_core::error::Error;

#[derive(Parser)]
#[command(name = "twoprice", version, about = "Two-price market equilibria: verify, allocate, and scan")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify every buyer's valuation.
    Classify { market: PathBuf },
    /// Closure, intersection indices, and slope tables for one buyer.
    Geometry {
        market: PathBuf,
        #[arg(long, default_value_t = 0)]
        buyer: usize,
    },
    /// Run the guaranteed-discrepancy allocation for a symmetric market.
    Allocate {
        market: PathBuf,
        /// Force the identical-buyer algorithm.
        #[arg(long)]
        identical: bool,
    },
    /// Check an equilibrium file against a market.
    Verify {
        #[arg(long, value_parser = ["2pe", "we", "ce"])]
        kind: String,
        market: PathBuf,
        equilibrium: PathBuf,
    },
    /// Scan all splits for the minimum-discrepancy uniform support.
    MinDiscrepancy { market: PathBuf },
    /// Resolve or check a simultaneous second-price auction.
    Auction {
        #[arg(value_parser = ["resolve", "check"])]
        action: String,
        market: PathBuf,
        bids: PathBuf,
        #[arg(long, default_value = "index", value_parser = ["alloc", "index"])]
        tiebreak: String,
        /// Allocation file backing `--tiebreak alloc`.
        #[arg(long)]
        allocation: Option<PathBuf>,
    },
    /// Check or convert endowment equilibria.
    Endowment {
        #[arg(value_parser = ["check", "convert"])]
        action: String,
        market: PathBuf,
        equilibrium: PathBuf,
        /// One of id, al, sp, or file:<path> with explicit tables.
        #[arg(long, default_value = "id")]
        gain: String,
    },
    /// Emit a named benchmark market as JSON.
    PaperInstance { name: String },
    /// Recompute a published fixture and verify it cell by cell.
    Reproduce { name: String },
    /// CSV of values, closure, and slopes for one buyer.
    Plotdata {
        market: PathBuf,
        #[arg(long, default_value_t = 0)]
        buyer: usize,
        /// Append decimal approximation columns.
        #[arg(long)]
        approx: bool,
    },
    /// Classify, allocate, verify, and convert in one run.
    Pipeline { market: PathBuf },
}

fn read(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Malformed(_)
        | Error::DimensionMismatch(_)
        | Error::UnknownInstance(_)
        | Error::IndexOutOfRange(_)
        | Error::CountMismatch(_)
        | Error::PriceOrderViolation { .. } => 3,
        Error::InstanceTooLarge(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let outcome: Result<(serde_json::Value, bool, bool), Error> = (|| {
        match &cli.command {
            Command::Classify { market } => {
                Ok((twoprice::cmd_classify(&read(market)?)?, true, false))
            }
            Command::Geometry { market, buyer } => {
                Ok((twoprice::cmd_geometry(&read(market)?, *buyer)?, true, false))
            }
            Command::Allocate { market, identical } => Ok((
                twoprice::cmd_allocate(&read(market)?, *identical)?,
                true,
                false,
            )),
            Command::Verify {
                kind,
                market,
                equilibrium,
            } => {
                let (value, holds) =
                    twoprice::cmd_verify(kind, &read(market)?, &read(equilibrium)?)?;
                Ok((value, holds, false))
            }
            Command::MinDiscrepancy { market } => {
                Ok((twoprice::cmd_min_discrepancy(&read(market)?)?, true, false))
            }
            Command::Auction {
                action,
                market,
                bids,
                tiebreak,
                allocation,
            } => {
                let allocation_text = match allocation {
                    Some(path) => Some(read(path)?),
                    None => None,
                };
                let (value, holds) = twoprice::cmd_auction(
                    action,
                    &read(market)?,
                    &read(bids)?,
                    tiebreak,
                    allocation_text.as_deref(),
                )?;
                Ok((value, holds, false))
            }
            Command::Endowment {
                action,
                market,
                equilibrium,
                gain,
            } => {
                let (value, holds) =
                    twoprice::cmd_endowment(action, &read(market)?, &read(equilibrium)?, gain)?;
                Ok((value, holds, false))
            }
            Command::PaperInstance { name } => {
                Ok((twoprice::cmd_paper_instance(name)?, true, false))
            }
            Command::Reproduce { name } => Ok((reproduce(name)?, true, false)),
            Command::Plotdata {
                market,
                buyer,
                approx,
            } => {
                let csv = twoprice::cmd_plotdata(&read(market)?, *buyer, *approx)?;
                print!("{csv}");
                Ok((serde_json::Value::Null, true, true))
            }
            Command::Pipeline { market } => {
                let text = read(market)?;
                let results = twoprice::cmd_pipeline(&text)?;
                let report = twoprice::run_report(
                    "pipeline",
                    &[&text],
                    results,
                    started.elapsed().as_millis(),
                );
                Ok((report, true, false))
            }
        }
    })();

    match outcome {
        Ok((value, holds, raw_already_printed)) => {
            if !raw_already_printed {
                println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
            }
            if holds {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
