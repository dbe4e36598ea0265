//! `lob-hawkes`: ingest, describe, calibrate, simulate and diagnose limit
//! order book event streams.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "lob-hawkes", version, about = "Compound Hawkes limit order book toolkit")]
struct Cli {
    /// Pipeline configuration (TOML or JSON); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify a LOBSTER message file into the twelve event types.
    Ingest(IngestArgs),
    /// Size histograms, spike masses, price gaps and time-of-day profiles.
    Stats(StatsArgs),
    /// Estimate a model from classified days.
    Calibrate(CalibrateArgs),
    /// Simulate a session from a model document.
    Simulate(SimulateArgs),
    /// Time-rescaling residuals, Q-Q pairs, KS and Hoeffding tests.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub messages: PathBuf,
    /// LOBSTER orderbook file aligned with the messages.
    #[arg(long)]
    pub book: Option<PathBuf>,
    /// Book before the first message (JSON snapshot).
    #[arg(long)]
    pub initial_book: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Revealed-level depth samples for calibration.
    #[arg(long)]
    pub depth_out: Option<PathBuf>,
    /// Discard report (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub tick_units: Option<i64>,
    #[arg(long)]
    pub warm_up: Option<f64>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub classified: PathBuf,
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// One classified CSV per day.
    #[arg(long, num_args = 1.., required = true)]
    pub classified: Vec<PathBuf>,
    /// Estimation grid (TOML or JSON), overriding the config's grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Revealed-level depth samples; defaults to best-quote limit-order sizes.
    #[arg(long)]
    pub depth: Option<PathBuf>,
    /// Fixes the spread exponent instead of estimating it.
    #[arg(long)]
    pub spread_beta: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Calibration report (JSON); defaults to `<out stem>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-day summary (CSV); defaults to `<out stem>.days.csv`.
    #[arg(long)]
    pub days_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Seconds after the session start.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Also write the session as a LOBSTER message file.
    #[arg(long, requires = "book_out")]
    pub messages_out: Option<PathBuf>,
    /// LOBSTER orderbook file matching `--messages-out`.
    #[arg(long, requires = "messages_out")]
    pub book_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub classified: PathBuf,
    /// Book trajectory of the events; gives queue emptiness to the compensator.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub quantiles: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let cfg = match &cli.config {
        Some(path) => config::load(path),
        None => Ok(config::Config::default()),
    };
    let outcome = cfg.and_then(|cfg| match cli.command {
        Command::Ingest(a) => commands::ingest(&cfg, &a),
        Command::Stats(a) => commands::stats(&cfg, &a),
        Command::Calibrate(a) => commands::calibrate(&cfg, &a),
        Command::Simulate(a) => commands::simulate(&cfg, &a),
        Command::Diagnose(a) => commands::diagnose(&cfg, &a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let doc = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{doc}");
            if e.is_contract_violation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
