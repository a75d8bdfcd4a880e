//! The three subcommands: `train`, `eval`, `gen-synthetic`.

use std::fs;
use std::path::{Path, PathBuf};

use mixtea_core::encoder::GraphIndices;
use mixtea_core::eval::{evaluate, rank_split, write_ranking_dump, Direction, MetricsReport, Split};
use mixtea_core::kg::build_dataset;
use mixtea_core::pseudo::write_confidence_dump;
use mixtea_core::synthetic::{write_openea_dir, SyntheticConfig, SyntheticError};
use mixtea_core::train::{load_checkpoint, save_checkpoint, train, EpochRecord};
use mixtea_core::{AlignmentDataset, ModelParams};

use crate::config::RunConfig;
use crate::CliError;

pub const METRICS_CSV_HEADER: &str = "epoch,loss_a,loss_u,lambda,beta,valid_hit1_st,valid_hit1_ts";

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn cmd_train(cfg: RunConfig) -> Result<(), CliError> {
    let dataset_dir = cfg
        .dataset_dir
        .clone()
        .ok_or_else(|| CliError::Usage("`dataset_dir` is required (flag or config)".into()))?;
    cfg.encoder
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    cfg.train
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| runtime(format!("cannot create {}: {e}", cfg.output_dir.display())))?;
    write_text(&cfg.output_dir.join("run_manifest"), &cfg.manifest())?;

    let dataset = build_dataset(&dataset_dir, cfg.fold).map_err(runtime)?;
    let mut train_cfg = cfg.train.clone();
    train_cfg.capture_pseudo = cfg.dump_pseudo;

    let outcome = train(&dataset, &cfg.encoder, &train_cfg).map_err(runtime)?;

    write_text(
        &cfg.output_dir.join("metrics.csv"),
        &metrics_csv(&outcome.history),
    )?;
    save_checkpoint(
        &cfg.output_dir.join("checkpoint"),
        &outcome.student,
        &cfg.encoder,
        !cfg.train.no_rel,
    )
    .map_err(runtime)?;

    if let Some(pseudo) = &outcome.final_pseudo {
        let mut raw = Vec::new();
        write_confidence_dump(&pseudo.raw, &mut raw).map_err(runtime)?;
        fs::write(cfg.output_dir.join("pseudo_tea.tsv"), raw)
            .map_err(|e| runtime(format!("pseudo dump: {e}")))?;
        let mut rect = Vec::new();
        write_confidence_dump(&pseudo.rectified, &mut rect).map_err(runtime)?;
        fs::write(cfg.output_dir.join("pseudo_tea_rectified.tsv"), rect)
            .map_err(|e| runtime(format!("pseudo dump: {e}")))?;
    }

    let idx = GraphIndices::build(&dataset);
    let use_relations = !cfg.train.no_rel;
    let mut reports = Vec::new();
    for direction in [Direction::SourceToTarget, Direction::TargetToSource] {
        reports.push(
            evaluate(&outcome.student, &dataset, &idx, use_relations, Split::Test, direction)
                .map_err(runtime)?,
        );
    }
    let report_text: String = reports.iter().map(machine_line).collect();
    write_text(&cfg.output_dir.join("report.txt"), &report_text)?;

    println!("trained {} epochs; outputs in {}", outcome.history.len(), cfg.output_dir.display());
    print_table(&reports);
    Ok(())
}

pub struct EvalRequest {
    pub checkpoint: PathBuf,
    pub dataset_dir: PathBuf,
    pub fold: usize,
    pub split: Split,
    pub direction: Direction,
    pub report: Option<PathBuf>,
    pub dump_rankings: Option<PathBuf>,
}

pub fn cmd_eval(req: EvalRequest) -> Result<(), CliError> {
    let (params, _, use_relations) = load_checkpoint(&req.checkpoint).map_err(runtime)?;
    let dataset = build_dataset(&req.dataset_dir, req.fold).map_err(runtime)?;
    check_shapes(&params, &dataset)?;

    let idx = GraphIndices::build(&dataset);
    let report = evaluate(&params, &dataset, &idx, use_relations, req.split, req.direction)
        .map_err(runtime)?;

    if let Some(path) = &req.dump_rankings {
        let embeddings =
            mixtea_core::encoder::encode_values(&params, &idx, use_relations).map_err(runtime)?;
        let ranking =
            rank_split(&embeddings, &dataset, &idx, req.split, req.direction).map_err(runtime)?;
        let mut buf = Vec::new();
        write_ranking_dump(&ranking, &mut buf).map_err(runtime)?;
        fs::write(path, buf).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    }

    let line = machine_line(&report);
    if let Some(path) = &req.report {
        write_text(path, &line)?;
    }
    print_table(std::slice::from_ref(&report));
    print!("{line}");
    Ok(())
}

fn check_shapes(params: &ModelParams, dataset: &AlignmentDataset) -> Result<(), CliError> {
    let entities = dataset.source_kg.entity_count() + dataset.target_kg.entity_count();
    if params.entity_emb.rows() != entities {
        return Err(runtime(format!(
            "checkpoint tensor entity_emb has {} rows but the dataset has {} entities",
            params.entity_emb.rows(),
            entities
        )));
    }
    if params.relation_emb.rows() != dataset.relation_count() {
        return Err(runtime(format!(
            "checkpoint tensor relation_emb has {} rows but the dataset has {} relations",
            params.relation_emb.rows(),
            dataset.relation_count()
        )));
    }
    Ok(())
}

pub struct GenRequest {
    pub entities: usize,
    pub relations: usize,
    pub avg_degree: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub train_fraction: Option<f64>,
    pub valid_fraction: Option<f64>,
}

pub fn cmd_gen_synthetic(req: GenRequest) -> Result<(), CliError> {
    let mut cfg = SyntheticConfig::new(req.entities, req.relations, req.avg_degree, req.seed);
    if let Some(f) = req.train_fraction {
        cfg.train_fraction = f;
    }
    if let Some(f) = req.valid_fraction {
        cfg.valid_fraction = f;
    }
    write_openea_dir(&cfg, &req.out).map_err(|e| match e {
        SyntheticError::Degenerate(_) => CliError::Usage(e.to_string()),
        SyntheticError::Io { .. } => runtime(e),
    })?;
    println!(
        "wrote synthetic dataset: {} entities/side, {} relations each, fold 1 under {}",
        req.entities,
        req.relations,
        req.out.display()
    );
    Ok(())
}

fn metrics_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.epoch, r.loss_a, r.loss_u, r.lambda, r.beta, r.valid_hit1_st, r.valid_hit1_ts
        ));
    }
    out
}

fn machine_line(r: &MetricsReport) -> String {
    format!(
        "split={} direction={} hits1={} hits5={} mrr={}\n",
        r.split.label(),
        r.direction.label(),
        r.hits1,
        r.hits5,
        r.mrr
    )
}

fn print_table(reports: &[MetricsReport]) {
    println!("{:<7}{:<11}{:>8}{:>8}{:>8}", "split", "direction", "hits@1", "hits@5", "mrr");
    for r in reports {
        println!(
            "{:<7}{:<11}{:>8.4}{:>8.4}{:>8.4}",
            r.split.label(),
            r.direction.label(),
            r.hits1,
            r.hits5,
            r.mrr
        );
    }
}

fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| runtime(format!("{}: {e}", path.display())))
}
