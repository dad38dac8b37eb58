use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod data;
mod error;

use config::PipelineConfig;
use error::Result;

/// SS-TE event encoding and first-to-spike recognition pipeline.
#[derive(Parser)]
#[command(name = "eventf2s", version)]
struct Cli {
    /// Pipeline config (TOML). Built-in toy defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides every seed in the config (training shuffle, init, bench).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Run directory; defaults to runs/<command>-<timestamp>.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode one event file (.bin N-MNIST or CSV) and write the passed events as CSV.
    Encode { input: PathBuf, output: PathBuf },
    /// TP/FP sweep over thresholds on synthetic signal-plus-noise mixtures.
    DenoiseBench,
    /// Train the network, checkpointing after every epoch.
    Train {
        /// Continue from this checkpoint; epoch numbering carries on.
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Accuracy of a checkpoint on the test split.
    Eval {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// First-layer computation cost for raw vs encoded events.
    Cost,
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.apply_seed(s);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report types are serialisable"));
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Encode { input, output } => {
            print_json(&commands::encode(&cfg, &input, &output, out)?);
        }
        Command::DenoiseBench => {
            let dir = commands::run_dir(out, "denoise-bench")?;
            let summary = commands::denoise_bench(&cfg, &dir)?;
            println!("snr_target  seed  snr     theta  tp      fp");
            for b in &summary.blocks {
                for r in &b.rows {
                    println!(
                        "{:<10}  {:<4}  {:.4}  {:<5}  {:.4}  {:.4}",
                        b.snr_target, b.seed, b.snr, r.theta, r.tp_rate, r.fp_rate
                    );
                }
            }
            println!("wrote {}", dir.join("denoise.csv").display());
        }
        Command::Train { resume } => {
            let dir = commands::run_dir(out, "train")?;
            let summary = commands::train(&cfg, &dir, resume.as_deref())?;
            print_json(&summary);
            println!("wrote {}", dir.display());
        }
        Command::Eval { checkpoint } => {
            let dir = commands::run_dir(out, "eval")?;
            print_json(&commands::eval(&cfg, &checkpoint, &dir)?);
        }
        Command::Cost => {
            let dir = commands::run_dir(out, "cost")?;
            print_json(&commands::cost(&cfg, &dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
