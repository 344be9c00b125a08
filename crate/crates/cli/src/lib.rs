//! Command-line pipeline around `panos-core`.
//!
//! Every subcommand writes its artifacts plus a `manifest.json` into `--out`.

pub mod commands;
pub mod manifest;
pub mod settings;
pub mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use panos_core::Result;

#[derive(Debug, Parser)]
#[command(
    name = "panos",
    version,
    about = "Payload-aware velocity estimation pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run open-loop rollouts and write a sequence dataset.
    Collect {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/collect")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the velocity model on a dataset.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/train")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the controller x terrain x payload x seed trial matrix.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/compare")]
        out: PathBuf,
        /// Overrides the terrain seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Explained-variance report; each input file (dataset or run log) is one group.
    PcaReport {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "out/pca")]
        out: PathBuf,
    },
    /// Run a single closed-loop trial.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/eval")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Collect { config, out, seed } => {
            let cfg = settings::load(config.as_deref(), "collect.seed", seed)?;
            let s = settings::CollectSettings::from_config(cfg)?;
            let o = commands::cmd_collect(&s, &out)?;
            println!(
                "wrote {} sequences to {}",
                o.sequences.len(),
                o.dataset.display()
            );
        }
        Command::Train {
            dataset,
            config,
            out,
            seed,
        } => {
            let cfg = settings::load(config.as_deref(), "train.seed", seed)?;
            let t = settings::train_from_config(cfg)?;
            let o = commands::cmd_train(&dataset, &t, &out)?;
            if let Some(last) = o.curve.last() {
                println!(
                    "trained {} epochs, final velocity loss {:.5}; model at {}",
                    last.epoch,
                    last.losses.velocity_loss,
                    o.model.display()
                );
            }
        }
        Command::Compare {
            config,
            out,
            seed,
            checkpoint,
        } => {
            let cfg = settings::load(config.as_deref(), "compare.terrain_seed", seed)?;
            let s = settings::CompareSettings::from_config(cfg)?;
            let o = commands::cmd_compare(&s, checkpoint.as_deref(), &out)?;
            println!(
                "wrote {} report rows to {}",
                o.reports.len(),
                out.join(commands::REPORT_FILE).display()
            );
        }
        Command::PcaReport { inputs, out } => {
            let o = commands::cmd_pca_report(&inputs, &out)?;
            for (name, f) in &o.groups {
                println!("{name}: top-1 fraction {:.4}", f[0]);
            }
        }
        Command::Eval {
            config,
            out,
            seed,
            checkpoint,
        } => {
            let cfg = settings::load(config.as_deref(), "eval.seed", seed)?;
            let s = settings::EvalSettings::from_config(cfg)?;
            let o = commands::cmd_eval(&s, checkpoint.as_deref(), &out)?;
            println!(
                "{} on {}: mean jerk {:.3} m/s^3, vibration cost {:.3} cm",
                o.report.controller, o.report.terrain, o.report.jerk.mean, o.report.vibration_cost
            );
        }
    }
    Ok(())
}

/// Configures logging from `PANOS_LOG_LEVEL` (error, warn, info, debug; default warn).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("PANOS_LOG_LEVEL", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}
