//! Run configuration: defaults, `key = value` config files, flag overrides,
//! and the run manifest.
//!
//! Precedence is defaults < config file < command-line flags. The manifest
//! written by every training run lists the full effective configuration in
//! the same `key = value` syntax, so a manifest is itself a valid config
//! file and reruns reproduce the run exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mixtea_core::encoder::EncoderConfig;
use mixtea_core::train::{TrainConfig, TrainMode};

use crate::CliError;

/// Everything one training run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_dir: Option<PathBuf>,
    pub fold: usize,
    pub output_dir: PathBuf,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub dump_pseudo: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_dir: None,
            fold: 1,
            output_dir: PathBuf::from("mixtea_run"),
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            dump_pseudo: false,
        }
    }
}

impl RunConfig {
    /// Applies one configuration key. Unknown keys and malformed values are
    /// usage errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let usage = |msg: String| CliError::Usage(msg);
        macro_rules! parse {
            ($ty:ty) => {
                value
                    .parse::<$ty>()
                    .map_err(|_| usage(format!("bad value `{value}` for `{key}`")))?
            };
        }
        match key {
            "dataset_dir" => self.dataset_dir = Some(PathBuf::from(value)),
            "fold" => self.fold = parse!(usize),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "mode" => {
                self.train.mode = TrainMode::parse(value).ok_or_else(|| {
                    usage(format!(
                        "bad value `{value}` for `mode` (expected mixtea, supervised_only or self_training_baseline)"
                    ))
                })?
            }
            "entity_dim" => self.encoder.entity_dim = parse!(usize),
            "relation_dim" => self.encoder.relation_dim = parse!(usize),
            "layers" => self.encoder.layers = parse!(usize),
            "margin" => self.train.margin = parse!(f64),
            "momentum" => self.train.momentum = parse!(f64),
            "neg_samples" => self.train.neg_samples = parse!(usize),
            "lambda_max" => self.train.lambda_max = parse!(f64),
            "ramp_epochs" => self.train.ramp_epochs = parse!(usize),
            "epochs" => self.train.epochs = parse!(usize),
            "lr" => self.train.lr = parse!(f64),
            "seed" => self.train.seed = parse!(u64),
            "validation_interval" => self.train.validation_interval = parse!(usize),
            "neg_refresh_interval" => self.train.neg_refresh_interval = parse!(usize),
            "pseudo_interval" => self.train.pseudo_interval = parse!(usize),
            "tau_student" => self.train.tau_student = parse!(f64),
            "tau_teacher" => self.train.tau_teacher = parse!(f64),
            "threshold" => self.train.self_training_threshold = parse!(f64),
            "patience" => {
                self.train.patience = if value == "none" { None } else { Some(parse!(usize)) }
            }
            "no_rel" => self.train.no_rel = parse!(bool),
            "no_lu" => self.train.no_lu = parse!(bool),
            "no_bdv" => self.train.no_bdv = parse!(bool),
            "no_mdr" => self.train.no_mdr = parse!(bool),
            "dump_pseudo" => self.dump_pseudo = parse!(bool),
            _ => return Err(usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Reads a `key = value` config file. `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Full effective configuration as a config file, one key per line.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        let dataset = self
            .dataset_dir
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let mut put = |key: &str, value: String| {
            writeln!(out, "{key} = {value}").expect("string write");
        };
        put("dataset_dir", dataset);
        put("fold", self.fold.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("mode", self.train.mode.label().to_string());
        put("entity_dim", self.encoder.entity_dim.to_string());
        put("relation_dim", self.encoder.relation_dim.to_string());
        put("layers", self.encoder.layers.to_string());
        put("margin", self.train.margin.to_string());
        put("momentum", self.train.momentum.to_string());
        put("neg_samples", self.train.neg_samples.to_string());
        put("lambda_max", self.train.lambda_max.to_string());
        put("ramp_epochs", self.train.ramp_epochs.to_string());
        put("epochs", self.train.epochs.to_string());
        put("lr", self.train.lr.to_string());
        put("seed", self.train.seed.to_string());
        put("validation_interval", self.train.validation_interval.to_string());
        put("neg_refresh_interval", self.train.neg_refresh_interval.to_string());
        put("pseudo_interval", self.train.pseudo_interval.to_string());
        put("tau_student", self.train.tau_student.to_string());
        put("tau_teacher", self.train.tau_teacher.to_string());
        put("threshold", self.train.self_training_threshold.to_string());
        put(
            "patience",
            self.train.patience.map_or("none".to_string(), |p| p.to_string()),
        );
        put("no_rel", self.train.no_rel.to_string());
        put("no_lu", self.train.no_lu.to_string());
        put("no_bdv", self.train.no_bdv.to_string());
        put("no_mdr", self.train.no_mdr.to_string());
        put("dump_pseudo", self.dump_pseudo.to_string());
        out
    }
}
