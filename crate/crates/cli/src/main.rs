//! `seiswarp` command-line front-end.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Config, Overrides};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "seiswarp",
    version,
    about = "Warped-frequency spectrogram clustering of seismic waveforms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Top-level seed every random stream derives from.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Frequency scale: linear, mel or warped:<c1>,<c2>.
    #[arg(long, global = true)]
    scale: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic waveforms and per-sample label files.
    Synth,
    /// Write spectrogram CSVs and PGM images for each segment and scale.
    Spectrogram,
    /// Extract CNN feature vectors.
    Features,
    /// Run the full pipeline and fit the mixture.
    Fit,
    /// Assign feature rows to the components of a saved mixture.
    Assign {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Features CSV as written by `fit`.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Baseline vs warped loss for each CNN depth.
    Compare,
    /// Random search over the warp constants.
    Search,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        scale: cli.scale.clone(),
        out: cli.out.clone(),
    };
    let mut cfg = Config::load(cli.config.as_deref(), &overrides)?;
    if cli.scale.is_some() {
        // an explicit --scale replaces the configured scale list
        cfg.spectrogram.scales.clear();
    }
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Spectrogram => commands::spectrogram(&cfg),
        Command::Features => commands::features(&cfg),
        Command::Fit => commands::fit(&cfg),
        Command::Assign { model, features } => {
            if model.is_some() {
                cfg.assign.model = model;
            }
            if features.is_some() {
                cfg.assign.features = features;
            }
            commands::assign(&cfg)
        }
        Command::Compare => commands::compare(&cfg),
        Command::Search => commands::search(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
