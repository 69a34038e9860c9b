//! `segfair`: demographic fairness audits for tumor segmentation cohorts.

mod commands;
mod config;
mod context;
mod error;
mod ingest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Settings;
use context::RunContext;
use error::{CliError, Result};

#[derive(Parser)]
#[command(name = "segfair", version, about = "Fairness audits for volumetric tumor segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit timestamps from figures.
    #[arg(long)]
    deterministic: bool,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    metadata: Option<PathBuf>,
    #[arg(long)]
    gold_dir: Option<PathBuf>,
    #[arg(long)]
    silver_dir: Option<PathBuf>,
    #[arg(long)]
    pred_dir: Option<PathBuf>,
    /// Target spacing in mm (`1`, `1,1,2.5`) or `native`.
    #[arg(long)]
    resample: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-case metrics, fairness report, regressions and Dice-vs-age figures.
    Audit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        threshold: Option<f64>,
        /// Groups compared by DPD and DIR, e.g. `Young/Older`.
        #[arg(long)]
        pair: Option<String>,
        /// `dice` (default) or `hd95` (lower is better).
        #[arg(long)]
        gap_metric: Option<String>,
        /// Precomputed scores CSV `case_id,age_group,dice[,hd95][,age]` instead of masks.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Tumor morphometry by age group with Welch t-tests.
    Morph {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Cross-validation manifest for an experimental design.
    Split {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// baseline, swap-young, swap-older, diff-bal or biased-input.
        #[arg(long)]
        design: Option<String>,
        #[arg(long)]
        folds: Option<usize>,
        /// Draw this many cases per age group before splitting.
        #[arg(long)]
        per_group: Option<usize>,
        #[arg(long)]
        n_easy: Option<usize>,
        #[arg(long)]
        n_hard: Option<usize>,
    },
    /// t-SNE embedding of per-case features with clustering scores.
    Embed {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// CSV `case_id,f0,f1,...`.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        perplexity: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Write a synthetic cohort with injected biases.
    Synth {
        #[command(flatten)]
        common: Common,
    },
}

fn settings(common: &Common) -> Result<Settings> {
    let mut s = match &common.config {
        Some(p) => Settings::parse_file(p)?,
        None => Settings::default(),
    };
    s.apply_overrides(&common.set)?;
    s.set_opt("seed", common.seed);
    s.set_opt("out", common.out.as_ref().map(|p| p.display().to_string()));
    s.set_opt("jobs", common.jobs);
    if common.deterministic {
        s.set("deterministic", true);
    }
    Ok(s)
}

fn apply_inputs(s: &mut Settings, i: &Inputs) {
    let show = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    s.set_opt("metadata", show(&i.metadata));
    s.set_opt("gold_dir", show(&i.gold_dir));
    s.set_opt("silver_dir", show(&i.silver_dir));
    s.set_opt("pred_dir", show(&i.pred_dir));
    s.set_opt("resample", i.resample.clone());
}

fn run(cli: Cli) -> Result<()> {
    let show = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let (name, s): (&'static str, Settings) = match &cli.command {
        Command::Audit {
            common,
            inputs,
            threshold,
            pair,
            gap_metric,
            scores,
        } => {
            let mut s = settings(common)?;
            apply_inputs(&mut s, inputs);
            s.set_opt("threshold", *threshold);
            s.set_opt("pair", pair.clone());
            s.set_opt("gap_metric", gap_metric.clone());
            s.set_opt("scores", show(scores));
            ("audit", s)
        }
        Command::Morph { common, inputs } => {
            let mut s = settings(common)?;
            apply_inputs(&mut s, inputs);
            ("morph", s)
        }
        Command::Split {
            common,
            inputs,
            design,
            folds,
            per_group,
            n_easy,
            n_hard,
        } => {
            let mut s = settings(common)?;
            apply_inputs(&mut s, inputs);
            s.set_opt("design", design.clone());
            s.set_opt("folds", *folds);
            s.set_opt("per_group", *per_group);
            s.set_opt("n_easy", *n_easy);
            s.set_opt("n_hard", *n_hard);
            ("split", s)
        }
        Command::Embed {
            common,
            metadata,
            features,
            perplexity,
            iters,
        } => {
            let mut s = settings(common)?;
            s.set_opt("metadata", show(metadata));
            s.set_opt("features", show(features));
            s.set_opt("perplexity", *perplexity);
            s.set_opt("iters", *iters);
            ("embed", s)
        }
        Command::Synth { common } => ("synth", settings(common)?),
    };
    if let Some(jobs) = s.parse::<usize>("jobs")? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let ctx = RunContext::new(name, s)?;
    std::fs::create_dir_all(&ctx.out).map_err(|e| CliError::io(&ctx.out, e))?;
    log::info!("{name}: config hash {}", ctx.settings.hash());
    match name {
        "audit" => commands::audit::run(&ctx),
        "morph" => commands::morph::run(&ctx),
        "split" => commands::split::run(&ctx),
        "embed" => commands::embed::run(&ctx),
        "synth" => commands::synth::run(&ctx),
        _ => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEGFAIR_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("segfair: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
