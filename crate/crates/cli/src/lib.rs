//! Command-line driver: ingest, train, evaluate, recommend, gradcheck,
//! sweep, stats and synth, configured by a TOML file plus flag overrides.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use revfm_core::model::ModelMode;

pub use commands::*;
pub use config::{FileConfig, Overrides, RunConfig, DATA_ENV};

#[derive(Debug, Parser)]
#[command(name = "revfm", version, about = "Review and engagement aware device-service recommender")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Review file, or a directory written by `ingest`.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Checkpoint path (default: <out>/model.ckpt).
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Ranking cutoff.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Model mode: review-only, engagement-only, fused-static, fused-dynamic or linear-fused.
    #[arg(long, global = true)]
    pub mode: Option<ModelMode>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, split and persist a review file.
    Ingest,
    /// Train a model and write a checkpoint with its history.
    Train {
        /// Overrides `train.epochs`.
        #[arg(long)]
        epochs: Option<usize>,
        /// Word-vector table used to initialize the embeddings.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Rating and ranking metrics of a checkpoint on the test split.
    Evaluate {
        /// Also train and evaluate every mode plus the baselines.
        #[arg(long)]
        ablation: bool,
    },
    /// Top-k services for one device.
    Recommend {
        #[arg(long)]
        device: String,
    },
    /// Finite-difference gradient check on a tiny instance.
    Gradcheck,
    /// Train and evaluate across feature sizes.
    Sweep {
        /// Comma-separated feature sizes.
        #[arg(long, value_delimiter = ',')]
        f: Option<Vec<usize>>,
    },
    /// Dataset statistics.
    Stats,
    /// Write a synthetic planted-factor review file.
    Synth,
}

impl Cli {
    /// Resolves the config file, flags and environment into run settings.
    pub fn run_config(&self) -> anyhow::Result<RunConfig> {
        let file = match &self.global.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let g = &self.global;
        let mut flags = Overrides {
            seed: g.seed,
            data: g.data.clone(),
            out: g.out.clone(),
            checkpoint: g.checkpoint.clone(),
            k: g.k,
            mode: g.mode,
            ..Default::default()
        };
        match &self.command {
            Command::Train { epochs, embeddings } => {
                flags.epochs = *epochs;
                flags.embeddings = embeddings.clone();
            }
            Command::Evaluate { ablation } => flags.ablation = *ablation,
            Command::Sweep { f } => flags.f_values = f.clone(),
            _ => {}
        }
        let env_data = std::env::var_os(DATA_ENV).map(PathBuf::from);
        RunConfig::resolve(file, &flags, env_data)
    }
}

/// Runs one command, writing its report to `w`.
pub fn run(cli: &Cli, w: &mut dyn Write) -> anyhow::Result<ExitCode> {
    let cfg = cli.run_config()?;
    match &cli.command {
        Command::Ingest => {
            cmd_ingest(&cfg, w)?;
        }
        Command::Train { .. } => {
            cmd_train(&cfg, w)?;
        }
        Command::Evaluate { .. } => {
            cmd_evaluate(&cfg, w)?;
        }
        Command::Recommend { device } => {
            cmd_recommend(&cfg, device, w)?;
        }
        Command::Gradcheck => {
            if !cmd_gradcheck(&cfg, w)?.passed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Sweep { .. } => {
            cmd_sweep(&cfg, w)?;
        }
        Command::Stats => {
            cmd_stats(&cfg, w)?;
        }
        Command::Synth => {
            cmd_synth(&cfg, w)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
