//! Alignment inference and ranking metrics.
//!
//! Inference is exact brute-force nearest-neighbor search under cosine
//! similarity, restricted to the entities of the evaluated split.
//! Similarity ties break toward the lower entity id so metric values are
//! reproducible.

use std::io::{self, Write};

use thiserror::Error;

use crate::diff::{cosine_matrix_values, select_rows, DiffError, Tensor};
use crate::encoder::{encode_values, GraphIndices, ModelParams};
use crate::kg::{AlignmentDataset, EntityId};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("hits_at_k needs k >= 1")]
    BadK,
}

/// Alignment direction of a ranking run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    SourceToTarget,
    TargetToSource,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::SourceToTarget => "s->t",
            Direction::TargetToSource => "t->s",
        }
    }
}

/// Mapping split of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// Per-query full candidate ranking plus the 1-based rank of the true
/// counterpart. Query `k`'s true counterpart is candidate `k`.
#[derive(Debug, Clone)]
pub struct RankingResult {
    /// Queried entity ids, in input order.
    pub query_ids: Vec<EntityId>,
    /// Candidate ids ordered by descending similarity (ties: lower id).
    pub ranked: Vec<Vec<EntityId>>,
    /// 1-based rank of each query's true counterpart.
    pub true_ranks: Vec<usize>,
}

/// Ranks every candidate for every query row by cosine similarity.
///
/// `queries` and `candidates` are aligned: row `k` of `candidates` (with id
/// `candidate_ids[k]`) is the true counterpart of query row `k` (id
/// `query_ids[k]`).
pub fn rank_targets(
    queries: &Tensor,
    candidates: &Tensor,
    query_ids: &[EntityId],
    candidate_ids: &[EntityId],
) -> Result<RankingResult, EvalError> {
    if queries.rows() != candidates.rows()
        || query_ids.len() != queries.rows()
        || candidate_ids.len() != candidates.rows()
    {
        return Err(DiffError::shape(
            "rank_targets",
            "queries, candidates and id lists must align",
        )
        .into());
    }
    let sims = cosine_matrix_values(queries, candidates)?;
    let mut ranked = Vec::with_capacity(queries.rows());
    let mut true_ranks = Vec::with_capacity(queries.rows());
    for q in 0..queries.rows() {
        let row = sims.row(q);
        let mut order: Vec<usize> = (0..candidate_ids.len()).collect();
        order.sort_by(|&a, &b| {
            row[b]
                .partial_cmp(&row[a])
                .expect("similarities are finite")
                .then(candidate_ids[a].cmp(&candidate_ids[b]))
        });
        let rank = order.iter().position(|&c| c == q).expect("query has a counterpart") + 1;
        ranked.push(order.into_iter().map(|c| candidate_ids[c]).collect());
        true_ranks.push(rank);
    }
    Ok(RankingResult {
        query_ids: query_ids.to_vec(),
        ranked,
        true_ranks,
    })
}

/// Fraction of queries whose true counterpart ranks within the top `k`.
pub fn hits_at_k(true_ranks: &[usize], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::BadK);
    }
    if true_ranks.is_empty() {
        return Err(EvalError::EmptySplit("ranked"));
    }
    let hits = true_ranks.iter().filter(|&&r| r <= k).count();
    Ok(hits as f64 / true_ranks.len() as f64)
}

/// Mean of reciprocal true ranks.
pub fn mean_reciprocal_rank(true_ranks: &[usize]) -> Result<f64, EvalError> {
    if true_ranks.is_empty() {
        return Err(EvalError::EmptySplit("ranked"));
    }
    let sum: f64 = true_ranks.iter().map(|&r| 1.0 / r as f64).sum();
    Ok(sum / true_ranks.len() as f64)
}

/// Hits@1, Hits@5 and MRR of one split in one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub hits1: f64,
    pub hits5: f64,
    pub mrr: f64,
    pub direction: Direction,
    pub split: Split,
}

impl MetricsReport {
    pub fn from_ranks(
        true_ranks: &[usize],
        direction: Direction,
        split: Split,
    ) -> Result<Self, EvalError> {
        Ok(Self {
            hits1: hits_at_k(true_ranks, 1)?,
            hits5: hits_at_k(true_ranks, 5)?,
            mrr: mean_reciprocal_rank(true_ranks)?,
            direction,
            split,
        })
    }
}

/// Ranks a split's mappings under the given model and reports metrics.
/// Candidates are the split's own counterpart entities.
pub fn evaluate(
    params: &ModelParams,
    dataset: &AlignmentDataset,
    idx: &GraphIndices,
    use_relations: bool,
    split: Split,
    direction: Direction,
) -> Result<MetricsReport, EvalError> {
    let embeddings = encode_values(params, idx, use_relations)?;
    let ranking = rank_split(&embeddings, dataset, idx, split, direction)?;
    MetricsReport::from_ranks(&ranking.true_ranks, direction, split)
}

/// Ranking of a split's mappings from precomputed embeddings.
pub fn rank_split(
    embeddings: &Tensor,
    dataset: &AlignmentDataset,
    idx: &GraphIndices,
    split: Split,
    direction: Direction,
) -> Result<RankingResult, EvalError> {
    let mappings = dataset.split(split);
    if mappings.is_empty() {
        return Err(EvalError::EmptySplit(split.label()));
    }
    let (query_ids, query_rows, candidate_ids, candidate_rows): (Vec<_>, Vec<_>, Vec<_>, Vec<_>) =
        match direction {
            Direction::SourceToTarget => (
                mappings.iter().map(|m| m.source).collect(),
                mappings.iter().map(|m| m.source).collect(),
                mappings.iter().map(|m| m.target).collect(),
                mappings.iter().map(|m| idx.global_target(m.target)).collect(),
            ),
            Direction::TargetToSource => (
                mappings.iter().map(|m| m.target).collect(),
                mappings.iter().map(|m| idx.global_target(m.target)).collect(),
                mappings.iter().map(|m| m.source).collect(),
                mappings.iter().map(|m| m.source).collect(),
            ),
        };
    let queries = select_rows(embeddings, &query_rows);
    let candidates = select_rows(embeddings, &candidate_rows);
    rank_targets(&queries, &candidates, &query_ids, &candidate_ids)
}

/// Writes one `source_id⇥true_rank⇥top10_ids` line per query, top ids
/// comma-separated.
pub fn write_ranking_dump(result: &RankingResult, out: &mut impl Write) -> io::Result<()> {
    for ((id, rank), ranked) in result
        .query_ids
        .iter()
        .zip(&result.true_ranks)
        .zip(&result.ranked)
    {
        let top: Vec<String> = ranked.iter().take(10).map(|t| t.to_string()).collect();
        writeln!(out, "{id}\t{rank}\t{}", top.join(","))?;
    }
    Ok(())
}
