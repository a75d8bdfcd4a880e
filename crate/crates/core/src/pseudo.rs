//! Teacher-side pseudo-mapping machinery.
//!
//! The teacher's similarity matrix over the unlabeled entities is turned
//! into votes in both alignment directions (row argmax each way), fused
//! into a joint-matching-confidence matrix weighted by validation Hit@1,
//! then rectified so that every pseudo mapping is down-weighted by the
//! confidence mass competing with it in its row and column. The student
//! learns from the rectified matrix through a row-wise cross-entropy.

use std::io::{self, Write};

use crate::diff::{DiffError, GradientTape, NodeId, Tensor};
use crate::kg::{EntityId, EntityMapping};

/// Weight of the source-to-target vote in [`bdv_fuse`]; the reverse
/// direction gets `1 - beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteWeight(f64);

impl VoteWeight {
    pub fn new(beta: f64) -> Result<Self, DiffError> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(DiffError::invalid(
                "vote_weight",
                format!("beta must lie in [0, 1], got {beta}"),
            ));
        }
        Ok(Self(beta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Direction weight from the two directions' last validation Hit@1 scores:
/// `beta = h_st / (h_st + h_ts)`, or 0.5 before the first validation.
pub fn update_beta(hit1_st: f64, hit1_ts: f64) -> Result<VoteWeight, DiffError> {
    if hit1_st < 0.0 || hit1_ts < 0.0 {
        return Err(DiffError::invalid(
            "update_beta",
            format!("negative Hit@1 score ({hit1_st}, {hit1_ts})"),
        ));
    }
    if hit1_st == 0.0 && hit1_ts == 0.0 {
        return VoteWeight::new(0.5);
    }
    VoteWeight::new(hit1_st / (hit1_st + hit1_ts))
}

/// Row argmax as a 0/1 matrix: exactly one 1 per row, ties broken by the
/// lowest column index.
pub fn one_hot_argmax(m: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(m.rows(), m.cols());
    for (r, col) in row_argmax(m).into_iter().enumerate() {
        out.set(r, col, 1.0);
    }
    out
}

/// Argmax column per row with the lowest-index tie rule.
pub fn row_argmax(m: &Tensor) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            let row = m.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Bi-directional voting: `P = beta * g(M_st) + (1 - beta) * g(M_ts)^T`
/// where `g` is the row-argmax one-hot conversion. Mutual agreement yields
/// confidence 1, a single-direction vote `beta` or `1 - beta`, no vote 0.
pub fn bdv_fuse(m_st: &Tensor, m_ts: &Tensor, beta: VoteWeight) -> Result<Tensor, DiffError> {
    if m_st.rows() != m_ts.cols() || m_st.cols() != m_ts.rows() {
        return Err(DiffError::shape(
            "bdv_fuse",
            format!(
                "{}x{} vs transposed {}x{}",
                m_st.rows(),
                m_st.cols(),
                m_ts.rows(),
                m_ts.cols()
            ),
        ));
    }
    let b = beta.value();
    let mut p = Tensor::zeros(m_st.rows(), m_st.cols());
    for (i, j) in row_argmax(m_st).into_iter().enumerate() {
        p.set(i, j, b * 1.0);
    }
    for (j, i) in row_argmax(m_ts).into_iter().enumerate() {
        p.set(i, j, p.get(i, j) + (1.0 - b) * 1.0);
    }
    Ok(p)
}

/// Matching-diversity rectification:
/// `P~[i][j] = P[i][j] / (rowsum_i + colsum_j - P[i][j])`.
///
/// Zero entries stay zero, every other entry shrinks toward the share it
/// holds of the competing confidence mass. Rows that carry no vote at all
/// violate the voting postcondition and are rejected.
pub fn mdr_rectify(p: &Tensor) -> Result<Tensor, DiffError> {
    if p.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(DiffError::invalid("mdr_rectify", "entries must lie in [0, 1]"));
    }
    let rows = p.rows();
    let cols = p.cols();
    let mut row_sums = vec![0.0; rows];
    let mut col_sums = vec![0.0; cols];
    for i in 0..rows {
        for j in 0..cols {
            let v = p.get(i, j);
            row_sums[i] += v;
            col_sums[j] += v;
        }
    }
    if let Some(i) = row_sums.iter().position(|&s| s == 0.0) {
        return Err(DiffError::invalid(
            "mdr_rectify",
            format!("row {i} has zero confidence mass"),
        ));
    }
    let mut out = Tensor::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = p.get(i, j);
            if v > 0.0 {
                out.set(i, j, v / (row_sums[i] + col_sums[j] - v));
            }
        }
    }
    Ok(out)
}

/// Cross-entropy between the row-softmaxed student similarities and the
/// row-softmaxed rectified pseudo-mapping matrix. The teacher side enters
/// as a constant: gradients flow only through `m_stu`.
pub fn pseudo_loss(
    tape: &mut GradientTape,
    m_stu: NodeId,
    p_tilde: &Tensor,
    student_temperature: f64,
    teacher_temperature: f64,
) -> Result<NodeId, DiffError> {
    if !tape.value(m_stu).same_shape(p_tilde) {
        return Err(DiffError::shape(
            "pseudo_loss",
            format!(
                "student {:?} vs teacher {:?}",
                tape.value(m_stu).shape(),
                p_tilde.shape()
            ),
        ));
    }
    if teacher_temperature <= 0.0 {
        return Err(DiffError::invalid("pseudo_loss", "non-positive teacher temperature"));
    }
    let mut target = p_tilde.clone();
    crate::diff::row_softmax_values(&mut target, teacher_temperature);
    let target = tape.leaf(target);

    let probs = tape.row_softmax(m_stu, student_temperature)?;
    let log_probs = tape.ln(probs)?;
    let weighted = tape.mul_elem(target, log_probs)?;
    let total = tape.sum_all(weighted);
    Ok(tape.scale(total, -1.0))
}

/// Plain threshold self-training: every `(i, argmax_j)` pair whose
/// similarity exceeds the threshold becomes a hard pseudo mapping. Matrix
/// coordinates are translated back through the unlabeled id lists.
pub fn threshold_self_training(
    m: &Tensor,
    threshold: f64,
    row_ids: &[EntityId],
    col_ids: &[EntityId],
) -> Result<Vec<EntityMapping>, DiffError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(DiffError::invalid(
            "threshold_self_training",
            format!("threshold must lie in (0, 1], got {threshold}"),
        ));
    }
    if row_ids.len() != m.rows() || col_ids.len() != m.cols() {
        return Err(DiffError::shape(
            "threshold_self_training",
            "id lists must match the similarity matrix",
        ));
    }
    let mut out = Vec::new();
    for (i, j) in row_argmax(m).into_iter().enumerate() {
        if m.get(i, j) > threshold {
            out.push(EntityMapping {
                source: row_ids[i],
                target: col_ids[j],
            });
        }
    }
    Ok(out)
}

/// Writes nonzero confidences as tab-separated `i⇥j⇥confidence` lines.
pub fn write_confidence_dump(p: &Tensor, out: &mut impl Write) -> io::Result<()> {
    for i in 0..p.rows() {
        for j in 0..p.cols() {
            let v = p.get(i, j);
            if v != 0.0 {
                writeln!(out, "{i}\t{j}\t{v}")?;
            }
        }
    }
    Ok(())
}
