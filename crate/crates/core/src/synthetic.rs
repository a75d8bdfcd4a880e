//! Generator for isomorphic toy benchmarks in OpenEA layout.
//!
//! Builds a random connected KG, copies it under a hidden entity and
//! relation permutation, and writes both graphs plus 20/10/70 link splits.
//! The permutation is the ground-truth alignment, so end-to-end accuracy
//! has an exact oracle without any external corpus.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("degenerate size: {0}")]
    Degenerate(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub entities: usize,
    pub relations: usize,
    /// Average undirected degree; triple count is `entities * avg_degree / 2`,
    /// floored at `entities - 1` so the graph stays connected.
    pub avg_degree: f64,
    pub seed: u64,
    /// Fraction of links used for training (default 0.2).
    pub train_fraction: f64,
    /// Fraction of links used for validation (default 0.1); the rest is test.
    pub valid_fraction: f64,
}

impl SyntheticConfig {
    pub fn new(entities: usize, relations: usize, avg_degree: f64, seed: u64) -> Self {
        Self {
            entities,
            relations,
            avg_degree,
            seed,
            train_fraction: 0.2,
            valid_fraction: 0.1,
        }
    }

    fn validate(&self) -> Result<(), SyntheticError> {
        if self.entities < 2 {
            return Err(SyntheticError::Degenerate("need at least 2 entities".into()));
        }
        if self.relations == 0 {
            return Err(SyntheticError::Degenerate("need at least 1 relation".into()));
        }
        if self.avg_degree <= 0.0 {
            return Err(SyntheticError::Degenerate("average degree must be positive".into()));
        }
        if self.train_fraction < 0.0
            || self.valid_fraction < 0.0
            || self.train_fraction + self.valid_fraction >= 1.0
        {
            return Err(SyntheticError::Degenerate(
                "train and valid fractions must be non-negative and sum below 1".into(),
            ));
        }
        Ok(())
    }
}

/// Writes a complete OpenEA-layout dataset under `out_dir` (fold 1).
/// Identical configs produce byte-identical files.
pub fn write_openea_dir(cfg: &SyntheticConfig, out_dir: &Path) -> Result<(), SyntheticError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.entities;

    // Random spanning tree first so no entity is isolated, then extra
    // random edges up to the requested degree. Exact duplicates avoided.
    let triple_target = std::cmp::max(n - 1, (n as f64 * cfg.avg_degree / 2.0).round() as usize);
    let mut triples: Vec<(usize, usize, usize)> = Vec::with_capacity(triple_target);
    let mut seen = HashSet::with_capacity(triple_target);
    for child in 1..n {
        let parent = rng.gen_range(0..child);
        let relation = rng.gen_range(0..cfg.relations);
        let (h, t) = if rng.gen_bool(0.5) { (parent, child) } else { (child, parent) };
        triples.push((h, relation, t));
        seen.insert((h, relation, t));
    }
    let mut attempts = 0;
    while triples.len() < triple_target && attempts < triple_target * 50 {
        attempts += 1;
        let h = rng.gen_range(0..n);
        let t = rng.gen_range(0..n);
        if h == t {
            continue;
        }
        let r = rng.gen_range(0..cfg.relations);
        if seen.insert((h, r, t)) {
            triples.push((h, r, t));
        }
    }

    // Hidden ground truth: entity permutation and relation permutation.
    let mut entity_perm: Vec<usize> = (0..n).collect();
    entity_perm.shuffle(&mut rng);
    let mut relation_perm: Vec<usize> = (0..cfg.relations).collect();
    relation_perm.shuffle(&mut rng);

    let mut target_triples: Vec<(usize, usize, usize)> = triples
        .iter()
        .map(|&(h, r, t)| (entity_perm[h], relation_perm[r], entity_perm[t]))
        .collect();
    target_triples.shuffle(&mut rng);

    // Splits over a shuffled copy of the true alignment.
    let mut link_order: Vec<usize> = (0..n).collect();
    link_order.shuffle(&mut rng);
    let n_train = (n as f64 * cfg.train_fraction).floor() as usize;
    let n_valid = (n as f64 * cfg.valid_fraction).floor() as usize;
    let (train_ids, rest) = link_order.split_at(n_train);
    let (valid_ids, test_ids) = rest.split_at(n_valid);

    let src_ent = |e: usize| format!("s:e{e}");
    let tgt_ent = |e: usize| format!("t:e{e}");
    let link_line = |e: &usize| format!("{}\t{}\n", src_ent(*e), tgt_ent(entity_perm[*e]));

    let triple_lines = |triples: &[(usize, usize, usize)], ent: &dyn Fn(usize) -> String, rel: &str| {
        triples
            .iter()
            .map(|&(h, r, t)| format!("{}\t{rel}:r{r}\t{}\n", ent(h), ent(t)))
            .collect::<String>()
    };

    let fold_dir = out_dir.join("721_5fold").join("1");
    fs::create_dir_all(&fold_dir).map_err(|source| SyntheticError::Io {
        path: fold_dir.clone(),
        source,
    })?;
    let write = |path: PathBuf, content: String| -> Result<(), SyntheticError> {
        fs::write(&path, content).map_err(|source| SyntheticError::Io { path, source })
    };

    write(out_dir.join("rel_triples_1"), triple_lines(&triples, &src_ent, "s"))?;
    write(out_dir.join("rel_triples_2"), triple_lines(&target_triples, &tgt_ent, "t"))?;
    write(
        out_dir.join("ent_links"),
        (0..n).map(|e| link_line(&e)).collect::<String>(),
    )?;
    write(fold_dir.join("train_links"), train_ids.iter().map(link_line).collect())?;
    write(fold_dir.join("valid_links"), valid_ids.iter().map(link_line).collect())?;
    write(fold_dir.join("test_links"), test_ids.iter().map(link_line).collect())?;
    Ok(())
}
