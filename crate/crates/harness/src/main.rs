use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use colsod_data::Split;
use colsod_harness::{evaluate, export_pr, grad_check, infer, train, Checkpoint, EvalOptions, RunConfig};

/// Collaborative-learning RGB-D salient object detection.
///
/// Configuration keys can be overridden with `COLSOD_<KEY>` environment
/// variables, for example `COLSOD_LR=0.01`.
#[derive(Parser)]
#[command(name = "colsod", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoints and a loss log.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint on a dataset split without reading depth.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset root holding `<split>/RGB` and `<split>/GT`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Score the ground truth against itself.
        #[arg(long)]
        gt_as_prediction: bool,
    },
    /// Write the saliency map of one RGB image.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Export the PR curve of an evaluation report.
    ExportPr {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        plot: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train { config, seed, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if out.is_some() {
                cfg.out_dir = out;
            }
            if cfg.out_dir.is_none() {
                bail!("set out_dir in the config or pass --out");
            }
            let ckpt = train(&cfg)?;
            let last = ckpt.history.last().context("no training steps were run")?;
            println!("{} steps, final loss {:.6}", ckpt.step, last.total);
        }
        Command::Eval {
            checkpoint,
            data,
            out,
            split,
            gt_as_prediction,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let opts = EvalOptions {
                split: split.parse::<Split>()?,
                gt_as_prediction,
                out_dir: Some(out),
            };
            let r = evaluate(&ckpt, &data, &opts)?.report;
            println!(
                "MAE {:.4}  F {:.4}  Fw {:.4}  S {:.4}  E {:.4}  ({} images)",
                r.mae, r.f_beta, r.f_beta_w, r.s_measure, r.e_measure, r.n_samples
            );
        }
        Command::Infer { checkpoint, image, out } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let o = infer(&ckpt, &image, &out)?;
            println!("{} ({}×{}, {:.4} s)", out.display(), o.width, o.height, o.latency.as_secs_f64());
        }
        Command::Gradcheck { config } => {
            let report = grad_check(&RunConfig::load(&config)?)?;
            let worst = report.worst().context("no parameters were probed")?;
            println!(
                "{} probes, {} kinked, max relative error {:.3e} at {}[{}]",
                report.probes.len(),
                report.kinked(),
                worst.rel_error,
                worst.name,
                worst.index
            );
        }
        Command::ExportPr { report, csv, plot } => {
            let curve = export_pr(&report, &csv, &plot)?;
            println!("{} PR points to {} and {}", curve.points.len(), csv.display(), plot.display());
        }
    }
    Ok(())
}
