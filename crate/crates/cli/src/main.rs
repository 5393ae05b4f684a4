//! Command-line front end: simulate, train, score and match-eval stages
//! connected through CSV files.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trajsense::Error;

#[derive(Parser, Debug)]
#[command(name = "trajsense", version, about = "Match camera tracks to wearable inertial sensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every stage.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scene: tracks.csv, sensors.csv, truth.csv.
    Simulate(commands::SimulateArgs),
    /// Train an estimator on a dataset directory.
    Train(commands::TrainArgs),
    /// Score every (track, sensor) window of a dataset.
    Score(commands::ScoreArgs),
    /// Run matching on a scores file and evaluate against ground truth.
    MatchEval(commands::MatchEvalArgs),
}

/// 2 usage/config, 3 data/contract, 4 numeric failure.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } => 2,
        Error::NumericFailure { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing::Level::WARN)
        .init();
    let result = match Cli::parse().command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Train(a) => commands::train(&a),
        Command::Score(a) => commands::score(&a),
        Command::MatchEval(a) => commands::match_eval(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
