use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use moodnet::cli::{featurize, run_eval, run_inspect, run_train, FeaturizeOptions, RunConfig};
use moodnet::train::Split;

#[derive(Parser)]
#[command(name = "moodnet", version, about = "Music mood classification from audio and lyrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
}

#[derive(Subcommand)]
enum Command {
    /// Turn WAV and lyrics files into cached feature tensors and a feature manifest.
    Featurize {
        #[arg(long)]
        config: PathBuf,
        /// Raw-asset manifest (overrides paths.raw_manifest).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Feature output directory (overrides MOODNET_CACHE and paths.cache_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train from a feature manifest, checkpointing every epoch.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Feature manifest (overrides paths.manifest).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Checkpoint directory (overrides paths.checkpoint_dir).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a checkpoint; prints a table and a JSON report.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Only evaluate records of this split.
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        /// Also write eval_report.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List parameter names, shapes and the total count of a checkpoint.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Featurize { config, manifest, out } => {
            let cfg = load_config(&config)?;
            let opts = FeaturizeOptions {
                raw_manifest: match manifest {
                    Some(m) => m,
                    None => cfg.raw_manifest()?,
                },
                embeddings: cfg.embeddings()?,
                out_dir: match out {
                    Some(o) => o,
                    None => cfg.cache_dir()?,
                },
                grid: cfg.model.text_grid,
            };
            let s = featurize(&opts).context("featurize")?;
            println!(
                "featurized {} records into {} (grid {}×{}; {} files written, {} up to date)",
                s.records,
                s.manifest_path.display(),
                s.grid.lines,
                s.grid.words,
                s.written,
                s.skipped
            );
            if s.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{} record(s) failed:", s.failures.len());
                for f in &s.failures {
                    eprintln!("  {}: {}", f.clip_id, f.error);
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Train {
            config,
            manifest,
            checkpoint,
        } => {
            let cfg = load_config(&config)?;
            let run = run_train(&cfg, manifest.as_deref(), checkpoint.as_deref(), |r| {
                let f1 = r.val_macro_f1.map(|v| format!("{:.2}", 100.0 * v)).unwrap_or("-".into());
                println!("epoch {:>4}  loss {:.6}  val macro F1 {f1}", r.epoch, r.loss);
            })
            .context("train")?;
            println!(
                "checkpoint {} (epoch {}), log {}",
                run.checkpoint_dir.display(),
                run.outcome.checkpoint.epoch,
                run.log_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            config,
            manifest,
            checkpoint,
            split,
            out,
        } => {
            let cfg = config.as_deref().map(load_config).transpose()?;
            let manifest = match (manifest, &cfg) {
                (Some(m), _) => m,
                (None, Some(c)) => c.feature_manifest()?,
                (None, None) => anyhow::bail!("eval needs --manifest or --config"),
            };
            let checkpoint = match (checkpoint, &cfg) {
                (Some(c), _) => c,
                (None, Some(c)) => c.checkpoint_dir()?,
                (None, None) => anyhow::bail!("eval needs --checkpoint or --config"),
            };
            let split = split.map(|s| match s {
                SplitArg::Train => Split::Train,
                SplitArg::Val => Split::Val,
            });
            let report = run_eval(cfg.as_ref(), &manifest, &checkpoint, split).context("eval")?;
            let json = serde_json::to_string_pretty(&report.to_json())?;
            print!("{}", report.to_table());
            println!("{json}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join("eval_report.json");
                std::fs::write(&path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Inspect { checkpoint } => {
            print!("{}", run_inspect(&checkpoint).context("inspect")?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
