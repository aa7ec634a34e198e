//! Command-line front end: `fedsim run` executes one experiment,
//! `fedsim compare` sweeps a strategy/fraction grid. Exit codes: 0 success,
//! 2 config error, 3 I/O error, 4 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedsim_core::cli::{self, Overrides};
use fedsim_core::engine::AggregationStrategy;

#[derive(Parser)]
#[command(
    name = "fedsim",
    version,
    about = "Federated-learning simulator with verification-and-payment, FedAvg, and Krum aggregation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_strategy(s: &str) -> Result<AggregationStrategy, String> {
    s.parse::<AggregationStrategy>().map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write metrics.csv, ledger.csv, summary.json,
    /// and manifest.json.
    Run {
        /// TOML config file; an empty file runs the reference defaults.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of communication rounds.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Run a (strategy, fraction) grid with shared data and adversaries and
    /// write comparison.csv.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated list: fedavg,krum,mechanism
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_strategy)]
        strategies: Vec<AggregationStrategy>,
        /// Comma-separated malicious fractions, e.g. 0.3,0.4,0.5
        #[arg(long, value_delimiter = ',', required = true)]
        fractions: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            rounds,
        } => cli::run_command(&config, &out, &Overrides { seed, rounds }).map(|manifest| {
            println!(
                "run complete in {:.2}s; artifacts in {}",
                manifest.duration_seconds,
                out.display()
            );
        }),
        Command::Compare {
            config,
            out,
            strategies,
            fractions,
            seed,
            rounds,
        } => cli::compare_command(
            &config,
            &strategies,
            &fractions,
            &out,
            &Overrides { seed, rounds },
        )
        .map(|table| {
            for cell in &table.cells {
                println!(
                    "{:<10} f={:<5} final_accuracy={:.4}",
                    cell.strategy.as_str(),
                    cell.malicious_fraction,
                    cell.final_accuracy
                );
            }
            for (strategy, degradation) in &table.degradation {
                println!("{:<10} degradation={:.4}", strategy.as_str(), degradation);
            }
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
