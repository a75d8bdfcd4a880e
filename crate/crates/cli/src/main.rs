//! `mixtea`: train, evaluate and generate datasets for semi-supervised
//! entity alignment. Exit codes: 0 success, 1 usage error, 2 runtime
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use mixtea_core::eval::{Direction, Split};

use commands::{cmd_eval, cmd_gen_synthetic, cmd_train, EvalRequest, GenRequest};
use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

#[derive(Parser)]
#[command(name = "mixtea", version, about = "Semi-supervised knowledge-graph entity alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes checkpoint, metrics.csv, report.txt and
    /// run_manifest into the output directory
    Train(Box<TrainArgs>),
    /// Evaluate a checkpoint on one dataset split
    Eval(EvalArgs),
    /// Generate an isomorphic synthetic benchmark in OpenEA layout
    GenSynthetic(GenArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Config file of `key = value` lines; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// OpenEA-layout dataset directory
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    /// Fold subdirectory under 721_5fold
    #[arg(long)]
    fold: Option<usize>,
    /// Where checkpoint, metrics and report are written
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// mixtea, supervised_only or self_training_baseline
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    entity_dim: Option<usize>,
    #[arg(long)]
    relation_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    neg_samples: Option<usize>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    ramp_epochs: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    validation_interval: Option<usize>,
    #[arg(long)]
    neg_refresh_interval: Option<usize>,
    #[arg(long)]
    pseudo_interval: Option<usize>,
    #[arg(long)]
    tau_student: Option<f64>,
    #[arg(long)]
    tau_teacher: Option<f64>,
    /// Similarity threshold of the self-training baseline
    #[arg(long)]
    threshold: Option<f64>,
    /// Validations without improvement before stopping; `none` disables
    #[arg(long)]
    patience: Option<String>,
    /// Ablation switch, repeatable: no_rel, no_lu, no_bdv or no_mdr
    #[arg(long)]
    ablate: Vec<String>,
    /// Dump the final pseudo-mapping matrices as TSV
    #[arg(long)]
    dump_pseudo: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    fold: usize,
    /// train, valid or test
    #[arg(long, default_value = "test")]
    split: String,
    /// st (source to target) or ts
    #[arg(long, default_value = "st")]
    direction: String,
    /// Also write the metric line to this file
    #[arg(long)]
    report: Option<PathBuf>,
    /// Dump per-entity rankings (source_id, true_rank, top-10 ids)
    #[arg(long)]
    dump_rankings: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    entities: usize,
    #[arg(long)]
    relations: usize,
    #[arg(long)]
    avg_degree: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Fraction of links used for training (default 0.2)
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Fraction of links used for validation (default 0.1)
    #[arg(long)]
    valid_fraction: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => cmd_train(build_run_config(*args)?),
        Command::Eval(args) => cmd_eval(EvalRequest {
            checkpoint: args.checkpoint,
            dataset_dir: args.dataset_dir,
            fold: args.fold,
            split: parse_split(&args.split)?,
            direction: parse_direction(&args.direction)?,
            report: args.report,
            dump_rankings: args.dump_rankings,
        }),
        Command::GenSynthetic(args) => cmd_gen_synthetic(GenRequest {
            entities: args.entities,
            relations: args.relations,
            avg_degree: args.avg_degree,
            seed: args.seed,
            out: args.out,
            train_fraction: args.train_fraction,
            valid_fraction: args.valid_fraction,
        }),
    }
}

/// Defaults, then the config file, then flags; flags win.
fn build_run_config(args: TrainArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    let mut set = |key: &str, value: Option<String>| -> Result<(), CliError> {
        if let Some(v) = value {
            cfg.apply(key, &v)?;
        }
        Ok(())
    };
    set("dataset_dir", args.dataset_dir.map(|p| p.display().to_string()))?;
    set("fold", args.fold.map(|v| v.to_string()))?;
    set("output_dir", args.output_dir.map(|p| p.display().to_string()))?;
    set("mode", args.mode)?;
    set("entity_dim", args.entity_dim.map(|v| v.to_string()))?;
    set("relation_dim", args.relation_dim.map(|v| v.to_string()))?;
    set("layers", args.layers.map(|v| v.to_string()))?;
    set("margin", args.margin.map(|v| v.to_string()))?;
    set("momentum", args.momentum.map(|v| v.to_string()))?;
    set("neg_samples", args.neg_samples.map(|v| v.to_string()))?;
    set("lambda_max", args.lambda_max.map(|v| v.to_string()))?;
    set("ramp_epochs", args.ramp_epochs.map(|v| v.to_string()))?;
    set("epochs", args.epochs.map(|v| v.to_string()))?;
    set("lr", args.lr.map(|v| v.to_string()))?;
    set("seed", args.seed.map(|v| v.to_string()))?;
    set("validation_interval", args.validation_interval.map(|v| v.to_string()))?;
    set("neg_refresh_interval", args.neg_refresh_interval.map(|v| v.to_string()))?;
    set("pseudo_interval", args.pseudo_interval.map(|v| v.to_string()))?;
    set("tau_student", args.tau_student.map(|v| v.to_string()))?;
    set("tau_teacher", args.tau_teacher.map(|v| v.to_string()))?;
    set("threshold", args.threshold.map(|v| v.to_string()))?;
    set("patience", args.patience)?;
    for name in &args.ablate {
        match name.as_str() {
            "no_rel" | "no_lu" | "no_bdv" | "no_mdr" => cfg.apply(name, "true")?,
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown ablation `{name}` (expected no_rel, no_lu, no_bdv or no_mdr)"
                )))
            }
        }
    }
    if args.dump_pseudo {
        cfg.apply("dump_pseudo", "true")?;
    }
    Ok(cfg)
}

fn parse_split(s: &str) -> Result<Split, CliError> {
    match s {
        "train" => Ok(Split::Train),
        "valid" => Ok(Split::Valid),
        "test" => Ok(Split::Test),
        _ => Err(CliError::Usage(format!("bad split `{s}` (expected train, valid or test)"))),
    }
}

fn parse_direction(s: &str) -> Result<Direction, CliError> {
    match s {
        "st" => Ok(Direction::SourceToTarget),
        "ts" => Ok(Direction::TargetToSource),
        _ => Err(CliError::Usage(format!("bad direction `{s}` (expected st or ts)"))),
    }
}
