//! Student training: supervised margin loss with truncated-nearest
//! negative sampling, the EMA teacher, the epoch loop that mixes labeled
//! and pseudo-mapping signals, and checkpoint I/O.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thiserror::Error;

use crate::diff::{
    adam_step, cosine_matrix_values, select_rows, AdamState, DiffError, GradientTape, NodeId,
    Tensor,
};
use crate::encoder::{encode, encode_values, register_params, EncoderConfig, GraphIndices, ModelParams};
use crate::eval::{evaluate, Direction, EvalError, Split};
use crate::kg::{AlignmentDataset, EntityMapping};
use crate::pseudo::{bdv_fuse, mdr_rectify, pseudo_loss, threshold_self_training, update_beta, VoteWeight};

/// A direction weight of exactly zero would leave the unvoted rows of the
/// pseudo-mapping matrix empty and break rectification, so validation-driven
/// weights are floored here.
const MIN_VOTE_WEIGHT: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch} (alignment {loss_a}, pseudo {loss_u})")]
    NonFiniteLoss { epoch: usize, loss_a: f64, loss_u: f64 },
    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Which training regime to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainMode {
    /// Teacher-student training with probabilistic pseudo mappings.
    #[default]
    MixTea,
    /// Margin loss over the labeled mappings only.
    SupervisedOnly,
    /// Single model with hard threshold self-training pseudo mappings.
    SelfTrainingBaseline,
}

impl TrainMode {
    pub fn label(self) -> &'static str {
        match self {
            TrainMode::MixTea => "mixtea",
            TrainMode::SupervisedOnly => "supervised_only",
            TrainMode::SelfTrainingBaseline => "self_training_baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mixtea" => Some(TrainMode::MixTea),
            "supervised_only" => Some(TrainMode::SupervisedOnly),
            "self_training_baseline" => Some(TrainMode::SelfTrainingBaseline),
            _ => None,
        }
    }
}

/// Training hyperparameters and ablation switches.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Margin of the alignment hinge loss.
    pub margin: f64,
    /// EMA momentum of the teacher.
    pub momentum: f64,
    /// Negatives per positive and side.
    pub neg_samples: usize,
    /// Final weight of the pseudo-mapping loss.
    pub lambda_max: f64,
    /// Epochs over which the pseudo-loss weight ramps up.
    pub ramp_epochs: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Validate (and refresh the vote weight) every this many epochs.
    pub validation_interval: usize,
    /// Resample negatives every this many epochs.
    pub neg_refresh_interval: usize,
    /// Regenerate pseudo mappings every this many epochs.
    pub pseudo_interval: usize,
    /// Softmax temperature on the student similarity rows.
    pub tau_student: f64,
    /// Sharpening temperature on the rectified pseudo-mapping rows.
    pub tau_teacher: f64,
    /// Similarity threshold of the self-training baseline.
    pub self_training_threshold: f64,
    /// Stop after this many validations without improvement; `None` runs
    /// the full epoch budget.
    pub patience: Option<usize>,
    /// Drop relation modeling from the encoder.
    pub no_rel: bool,
    /// Drop the pseudo-mapping loss.
    pub no_lu: bool,
    /// Vote only in the source-to-target direction.
    pub no_bdv: bool,
    /// Skip matching-diversity rectification.
    pub no_mdr: bool,
    /// Keep the last pseudo-mapping matrices in the outcome for debugging.
    pub capture_pseudo: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::MixTea,
            margin: 2.0,
            momentum: 0.9,
            neg_samples: 10,
            lambda_max: 1.0,
            ramp_epochs: 50,
            epochs: 200,
            lr: 0.005,
            seed: 42,
            validation_interval: 10,
            neg_refresh_interval: 10,
            pseudo_interval: 1,
            tau_student: 1.0,
            tau_teacher: 1.0,
            self_training_threshold: 0.9,
            patience: None,
            no_rel: false,
            no_lu: false,
            no_bdv: false,
            no_mdr: false,
            capture_pseudo: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::Config(msg.to_string()));
        if self.margin <= 0.0 {
            return bad("margin must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.neg_samples == 0 {
            return bad("neg_samples must be at least 1");
        }
        if self.lr <= 0.0 {
            return bad("lr must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.validation_interval == 0 || self.neg_refresh_interval == 0 || self.pseudo_interval == 0
        {
            return bad("intervals must be at least 1");
        }
        if self.tau_student <= 0.0 || self.tau_teacher <= 0.0 {
            return bad("temperatures must be positive");
        }
        if self.mode == TrainMode::SelfTrainingBaseline
            && !(self.self_training_threshold > 0.0 && self.self_training_threshold <= 1.0)
        {
            return bad("self-training threshold must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Per-positive corrupted pairs: `target_side[i]` replaces the target of
/// positive `i`, `source_side[i]` its source. Local ids in each KG.
#[derive(Debug, Clone)]
pub struct NegativeSet {
    pub target_side: Vec<Vec<usize>>,
    pub source_side: Vec<Vec<usize>>,
}

/// Truncated-nearest negative sampling: each corrupted entity is drawn
/// uniformly from the `ceil(1.25 k)` cosine-nearest entities of the one it
/// replaces (itself excluded). Deterministic for a given seed.
pub fn sample_negatives(
    embeddings: &Tensor,
    positives: &[EntityMapping],
    idx: &GraphIndices,
    k: usize,
    seed: u64,
) -> Result<NegativeSet, DiffError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truncation = (1.25 * k as f64).ceil() as usize;
    let source_rows: Vec<usize> = (0..idx.source_count).collect();
    let target_rows: Vec<usize> = (idx.source_count..idx.entity_count).collect();
    let source_emb = select_rows(embeddings, &source_rows);
    let target_emb = select_rows(embeddings, &target_rows);

    let pos_src_rows: Vec<usize> = positives.iter().map(|m| m.source).collect();
    let pos_tgt_rows: Vec<usize> = positives.iter().map(|m| idx.global_target(m.target)).collect();
    // similarity of each positive's entity against every entity on its side
    let src_sims = cosine_matrix_values(&select_rows(embeddings, &pos_src_rows), &source_emb)?;
    let tgt_sims = cosine_matrix_values(&select_rows(embeddings, &pos_tgt_rows), &target_emb)?;

    let mut target_side = Vec::with_capacity(positives.len());
    let mut source_side = Vec::with_capacity(positives.len());
    for (i, pos) in positives.iter().enumerate() {
        target_side.push(draw_from_nearest(
            tgt_sims.row(i),
            pos.target,
            truncation,
            k,
            &mut rng,
        ));
        source_side.push(draw_from_nearest(
            src_sims.row(i),
            pos.source,
            truncation,
            k,
            &mut rng,
        ));
    }
    Ok(NegativeSet { target_side, source_side })
}

fn draw_from_nearest(
    sims: &[f64],
    exclude: usize,
    truncation: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sims.len()).filter(|&e| e != exclude).collect();
    order.sort_by(|&a, &b| sims[b].partial_cmp(&sims[a]).expect("finite sims").then(a.cmp(&b)));
    let mut pool: Vec<usize> = order.into_iter().take(truncation).collect();
    if pool.len() >= k {
        // partial Fisher-Yates: draw k distinct entries
        for i in 0..k {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    } else {
        // fewer candidates than requested: sample with replacement
        (0..k).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
    }
}

/// Margin-based alignment loss: for every positive and each of its
/// corrupted pairs, `[d(pos) + margin - d(neg)]_+`, summed.
pub fn margin_loss(
    tape: &mut GradientTape,
    embeddings: NodeId,
    positives: &[EntityMapping],
    negatives: &NegativeSet,
    idx: &GraphIndices,
    margin: f64,
) -> Result<NodeId, DiffError> {
    if negatives.target_side.len() != positives.len() || negatives.source_side.len() != positives.len()
    {
        return Err(DiffError::shape(
            "margin_loss",
            "negative set does not match the positives",
        ));
    }
    let pos_src: Vec<usize> = positives.iter().map(|m| m.source).collect();
    let pos_tgt: Vec<usize> = positives.iter().map(|m| idx.global_target(m.target)).collect();

    let mut neg_src = Vec::new();
    let mut neg_tgt = Vec::new();
    let mut owner = Vec::new();
    for (i, pos) in positives.iter().enumerate() {
        for &t in &negatives.target_side[i] {
            neg_src.push(pos.source);
            neg_tgt.push(idx.global_target(t));
            owner.push(i);
        }
        for &s in &negatives.source_side[i] {
            neg_src.push(s);
            neg_tgt.push(idx.global_target(pos.target));
            owner.push(i);
        }
    }

    let ps = tape.gather_rows(embeddings, pos_src.into())?;
    let pt = tape.gather_rows(embeddings, pos_tgt.into())?;
    let pos_dist = tape.row_l2_distance(ps, pt)?;

    let ns = tape.gather_rows(embeddings, neg_src.into())?;
    let nt = tape.gather_rows(embeddings, neg_tgt.into())?;
    let neg_dist = tape.row_l2_distance(ns, nt)?;

    let pos_per_term = tape.gather_rows(pos_dist, owner.into())?;
    let gap = tape.sub(pos_per_term, neg_dist)?;
    let shifted = tape.add_const(gap, margin);
    let hinged = tape.relu(shifted);
    Ok(tape.sum_all(hinged))
}

/// EMA teacher update: every teacher tensor becomes
/// `momentum * teacher + (1 - momentum) * student`. No gradients involved.
pub fn ema_update(
    teacher: &mut ModelParams,
    student: &ModelParams,
    momentum: f64,
) -> Result<(), DiffError> {
    if !(0.0..1.0).contains(&momentum) {
        return Err(DiffError::invalid("ema_update", "momentum must lie in [0, 1)"));
    }
    let student_tensors: Vec<&Tensor> = student.named_tensors().into_iter().map(|(_, t)| t).collect();
    let mut teacher_tensors = teacher.tensors_mut();
    if student_tensors.len() != teacher_tensors.len() {
        return Err(DiffError::shape("ema_update", "parameter lists differ"));
    }
    for (tea, stu) in teacher_tensors.iter_mut().zip(student_tensors) {
        if !tea.same_shape(stu) {
            return Err(DiffError::shape("ema_update", "tensor shapes differ"));
        }
        for (t, s) in tea.data_mut().iter_mut().zip(stu.data()) {
            *t = momentum * *t + (1.0 - momentum) * s;
        }
    }
    Ok(())
}

/// Gaussian ramp-up: `lambda_max * exp(-5 (1 - min(epoch/ramp, 1))^2)`,
/// monotone from `lambda_max * e^-5` at epoch 0 to `lambda_max`.
pub fn ramp_up(epoch: usize, ramp_epochs: usize, lambda_max: f64) -> f64 {
    if ramp_epochs == 0 {
        return lambda_max;
    }
    let t = (epoch as f64 / ramp_epochs as f64).min(1.0);
    lambda_max * (-5.0 * (1.0 - t) * (1.0 - t)).exp()
}

/// One epoch's log line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_a: f64,
    pub loss_u: f64,
    pub lambda: f64,
    pub beta: f64,
    pub valid_hit1_st: f64,
    pub valid_hit1_ts: f64,
}

/// Last raw and rectified pseudo-mapping matrices of a run.
#[derive(Debug, Clone)]
pub struct PseudoMatrices {
    pub raw: Tensor,
    pub rectified: Tensor,
}

/// Trained student plus the per-epoch metric history.
#[derive(Debug)]
pub struct TrainOutcome {
    pub student: ModelParams,
    pub history: Vec<EpochRecord>,
    /// Only populated when [`TrainConfig::capture_pseudo`] is set and the
    /// run generated pseudo mappings.
    pub final_pseudo: Option<PseudoMatrices>,
}

/// Runs the full training procedure and returns the student model.
///
/// Each epoch: encode with the student, compute the alignment loss over the
/// (possibly augmented) positives, in MixTEA mode generate and rectify the
/// teacher's pseudo-mapping matrix and add the ramped pseudo loss, take an
/// Adam step, then move the teacher toward the student. Validation every
/// `validation_interval` epochs refreshes the direction vote weight.
pub fn train(
    dataset: &AlignmentDataset,
    enc_cfg: &EncoderConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    enc_cfg.validate()?;
    cfg.validate()?;
    if dataset.train.is_empty() {
        return Err(TrainError::Config("no training mappings".to_string()));
    }

    let idx = GraphIndices::build(dataset);
    let use_relations = !cfg.no_rel;
    let mut student = ModelParams::init(enc_cfg, idx.entity_count, idx.relation_count, cfg.seed)?;
    let mut teacher = student.clone();
    let mut adam = AdamState::new(cfg.lr, &student.shapes());

    let unlabeled_src: Vec<usize> = dataset.unlabeled_source.clone();
    let unlabeled_tgt: Vec<usize> = dataset
        .unlabeled_target
        .iter()
        .map(|&e| idx.global_target(e))
        .collect();

    let mut positives = dataset.train.clone();
    let mut known_pairs: HashSet<(usize, usize)> =
        positives.iter().map(|m| (m.source, m.target)).collect();
    let mut negatives: Option<NegativeSet> = None;
    let mut rectified: Option<Tensor> = None;
    let mut captured: Option<PseudoMatrices> = None;
    let mut beta = VoteWeight::new(0.5).expect("0.5 is in range");
    let mut last_hit_st = 0.0;
    let mut last_hit_ts = 0.0;
    let mut best_valid = f64::NEG_INFINITY;
    let mut stale_validations = 0usize;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut tape = GradientTape::new();
        let nodes = register_params(&mut tape, &student);
        let emb = encode(&mut tape, &nodes, &idx, use_relations)?;

        // Self-training baseline: harvest hard pseudo mappings from the
        // model's own similarities before computing this epoch's loss.
        if cfg.mode == TrainMode::SelfTrainingBaseline
            && epoch > 0
            && epoch % cfg.pseudo_interval == 0
        {
            let emb_values = tape.value(emb);
            let sims = cosine_matrix_values(
                &select_rows(emb_values, &unlabeled_src),
                &select_rows(emb_values, &unlabeled_tgt),
            )?;
            let found = threshold_self_training(
                &sims,
                cfg.self_training_threshold,
                &dataset.unlabeled_source,
                &dataset.unlabeled_target,
            )?;
            let mut grew = false;
            for m in found {
                if known_pairs.insert((m.source, m.target)) {
                    positives.push(m);
                    grew = true;
                }
            }
            if grew {
                negatives = None; // resample against the augmented set
            }
        }

        if negatives.is_none() || epoch % cfg.neg_refresh_interval == 0 {
            negatives = Some(sample_negatives(
                tape.value(emb),
                &positives,
                &idx,
                cfg.neg_samples,
                cfg.seed.wrapping_add(epoch as u64),
            )?);
        }
        let negs = negatives.as_ref().expect("sampled above");

        // Unit-length rows keep the hinge from being satisfied by norm
        // growth alone; with the margin at 2.0 (the unit-sphere diameter)
        // the loss keeps shaping the space for the whole run.
        let emb_norm = tape.row_normalize(emb)?;
        let loss_a_node = margin_loss(&mut tape, emb_norm, &positives, negs, &idx, cfg.margin)?;
        let loss_a = tape.value(loss_a_node).scalar_value();

        let lambda = ramp_up(epoch, cfg.ramp_epochs, cfg.lambda_max);
        let mut loss_u = 0.0;
        let mut beta_used = beta.value();
        let pseudo_active = cfg.mode == TrainMode::MixTea
            && !cfg.no_lu
            && !unlabeled_src.is_empty()
            && !unlabeled_tgt.is_empty();
        let loss_node = if pseudo_active {
            let vote = if cfg.no_bdv {
                VoteWeight::new(1.0).expect("1.0 is in range")
            } else {
                VoteWeight::new(beta.value().max(MIN_VOTE_WEIGHT))?
            };
            beta_used = vote.value();
            if rectified.is_none() || epoch % cfg.pseudo_interval == 0 {
                let tea_emb = encode_values(&teacher, &idx, use_relations)?;
                let m_st = cosine_matrix_values(
                    &select_rows(&tea_emb, &unlabeled_src),
                    &select_rows(&tea_emb, &unlabeled_tgt),
                )?;
                let m_ts = m_st.transpose();
                let fused = bdv_fuse(&m_st, &m_ts, vote)?;
                let adjusted = if cfg.no_mdr { fused.clone() } else { mdr_rectify(&fused)? };
                if cfg.capture_pseudo {
                    captured = Some(PseudoMatrices { raw: fused, rectified: adjusted.clone() });
                }
                rectified = Some(adjusted);
            }
            let target = rectified.as_ref().expect("generated above");
            let stu_src = tape.gather_rows(emb, unlabeled_src.clone().into())?;
            let stu_tgt = tape.gather_rows(emb, unlabeled_tgt.clone().into())?;
            let m_stu = tape.cosine_sim_matrix(stu_src, stu_tgt)?;
            let loss_u_node = pseudo_loss(&mut tape, m_stu, target, cfg.tau_student, cfg.tau_teacher)?;
            loss_u = tape.value(loss_u_node).scalar_value();
            let weighted = tape.scale(loss_u_node, lambda);
            tape.add(loss_a_node, weighted)?
        } else {
            loss_a_node
        };

        if !tape.value(loss_node).scalar_value().is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch, loss_a, loss_u });
        }

        let grads = tape.backward(loss_node)?;
        let grad_tensors: Vec<Tensor> = nodes.all().iter().map(|&n| grads.get(n)).collect();
        adam_step(&mut student.tensors_mut(), &grad_tensors, &mut adam)?;

        if cfg.mode == TrainMode::MixTea {
            ema_update(&mut teacher, &student, cfg.momentum)?;
        }

        if (epoch + 1) % cfg.validation_interval == 0 && !dataset.valid.is_empty() {
            let eval_model = if cfg.mode == TrainMode::MixTea { &teacher } else { &student };
            last_hit_st = evaluate(
                eval_model,
                dataset,
                &idx,
                use_relations,
                Split::Valid,
                Direction::SourceToTarget,
            )?
            .hits1;
            last_hit_ts = evaluate(
                eval_model,
                dataset,
                &idx,
                use_relations,
                Split::Valid,
                Direction::TargetToSource,
            )?
            .hits1;
            beta = update_beta(last_hit_st, last_hit_ts)?;

            if let Some(patience) = cfg.patience {
                if last_hit_st > best_valid {
                    best_valid = last_hit_st;
                    stale_validations = 0;
                } else {
                    stale_validations += 1;
                }
                if stale_validations > patience {
                    history.push(EpochRecord {
                        epoch,
                        loss_a,
                        loss_u,
                        lambda,
                        beta: beta_used,
                        valid_hit1_st: last_hit_st,
                        valid_hit1_ts: last_hit_ts,
                    });
                    break;
                }
            }
        }

        history.push(EpochRecord {
            epoch,
            loss_a,
            loss_u,
            lambda,
            beta: beta_used,
            valid_hit1_st: last_hit_st,
            valid_hit1_ts: last_hit_ts,
        });
    }

    Ok(TrainOutcome { student, history, final_pseudo: captured })
}

const CHECKPOINT_HEADER: &str = "mixtea-checkpoint v1";

/// Writes a plain-text checkpoint: a version header, the encoder shape, and
/// every tensor with a `tensor <name> <rows> <cols>` header followed by one
/// line per row. Float formatting round-trips exactly.
pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    cfg: &EncoderConfig,
    use_relations: bool,
) -> Result<(), TrainError> {
    let io_err = |source| TrainError::Io { path: path.to_path_buf(), source };
    let mut out = String::new();
    out.push_str(CHECKPOINT_HEADER);
    out.push('\n');
    out.push_str(&format!("entity_dim {}\n", cfg.entity_dim));
    out.push_str(&format!("relation_dim {}\n", cfg.relation_dim));
    out.push_str(&format!("layers {}\n", cfg.layers));
    out.push_str(&format!("use_relations {}\n", u8::from(use_relations)));
    for (name, tensor) in params.named_tensors() {
        out.push_str(&format!("tensor {} {} {}\n", name, tensor.rows(), tensor.cols()));
        for r in 0..tensor.rows() {
            let line: Vec<String> = tensor.row(r).iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(io_err)
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, EncoderConfig, bool), TrainError> {
    let bad = |msg: &str| TrainError::Checkpoint {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let text = fs::read_to_string(path).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_HEADER) {
        return Err(bad("unrecognized header"));
    }
    let mut header_value = |key: &str| -> Result<usize, TrainError> {
        let line = lines.next().ok_or_else(|| bad("truncated header"))?;
        let rest = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| bad(&format!("expected `{key}` line")))?;
        rest.trim().parse().map_err(|_| bad(&format!("bad `{key}` value")))
    };
    let cfg = EncoderConfig {
        entity_dim: header_value("entity_dim")?,
        relation_dim: header_value("relation_dim")?,
        layers: header_value("layers")?,
    };
    let use_relations = match header_value("use_relations")? {
        0 => false,
        1 => true,
        _ => return Err(bad("use_relations must be 0 or 1")),
    };

    let mut read_tensor = |expected_name: &str| -> Result<Tensor, TrainError> {
        let header = lines.next().ok_or_else(|| bad("missing tensor header"))?;
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 4 || parts[0] != "tensor" || parts[1] != expected_name {
            return Err(bad(&format!("expected tensor `{expected_name}`, found `{header}`")));
        }
        let rows: usize = parts[2].parse().map_err(|_| bad("bad row count"))?;
        let cols: usize = parts[3].parse().map_err(|_| bad("bad column count"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = lines.next().ok_or_else(|| bad("truncated tensor data"))?;
            for field in line.split(' ') {
                data.push(field.parse::<f64>().map_err(|_| bad("bad float"))?);
            }
        }
        Tensor::new(rows, cols, data).map_err(|e| bad(&format!("tensor `{expected_name}`: {e}")))
    };

    let entity_emb = read_tensor("entity_emb")?;
    let relation_emb = read_tensor("relation_emb")?;
    let mut gat_weights = Vec::with_capacity(cfg.layers);
    let mut attn_vectors = Vec::with_capacity(cfg.layers);
    for l in 0..cfg.layers {
        gat_weights.push(read_tensor(&format!("gat_weight_{l}"))?);
        attn_vectors.push(read_tensor(&format!("attn_vector_{l}"))?);
    }
    let fusion_logits = read_tensor("fusion_logits")?;

    let params = ModelParams {
        entity_emb,
        relation_emb,
        gat_weights,
        attn_vectors,
        fusion_logits,
    };
    for ((_, t), expected) in params.named_tensors().iter().zip(expected_shapes(&cfg, &params)) {
        if t.shape() != expected {
            return Err(bad("tensor shape inconsistent with header"));
        }
    }
    Ok((params, cfg, use_relations))
}

fn expected_shapes(cfg: &EncoderConfig, params: &ModelParams) -> Vec<(usize, usize)> {
    let mut shapes = vec![
        (params.entity_emb.rows(), cfg.entity_dim),
        (params.relation_emb.rows(), cfg.relation_dim),
    ];
    for _ in 0..cfg.layers {
        shapes.push((cfg.entity_dim, cfg.entity_dim));
        shapes.push((2 * cfg.entity_dim, 1));
    }
    shapes.push((cfg.layers + 2, 1));
    shapes
}
