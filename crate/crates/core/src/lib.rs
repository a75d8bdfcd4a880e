//! Semi-supervised knowledge-graph entity alignment.
//!
//! The pipeline aligns entities across two knowledge graphs from a small
//! seed set of labeled mappings. A GAT-based encoder embeds both graphs
//! into one vector space; a student model is trained on a margin loss over
//! the labeled mappings while a teacher model (an exponential moving
//! average of the student) votes in both alignment directions to produce
//! probabilistic pseudo mappings, rectified by matching diversity, that
//! feed a cross-entropy loss on the unlabeled entities.
//!
//! Module map:
//! - [`kg`]: OpenEA-format parsing and the in-memory graph pair.
//! - [`diff`]: dense 2-D tensors with tape-based reverse-mode
//!   differentiation, Adam, and Xavier initialization.
//! - [`encoder`]: the GAT + relation-aggregation encoder.
//! - [`pseudo`]: bi-directional voting, diversity rectification, and the
//!   pseudo-mapping loss.
//! - [`train`]: margin loss, negative sampling, EMA updates, and the
//!   training loop.
//! - [`eval`]: nearest-neighbor ranking and Hits@k / MRR metrics.
//! - [`synthetic`]: generator for isomorphic toy benchmarks in OpenEA
//!   layout.

pub mod diff;
pub mod encoder;
pub mod eval;
pub mod kg;
pub mod pseudo;
pub mod synthetic;
pub mod train;

pub use diff::{AdamState, GradientTape, Tensor};
pub use encoder::{EncoderConfig, ModelParams};
pub use eval::{Direction, MetricsReport, RankingResult, Split};
pub use kg::{AlignmentDataset, EntityMapping, KnowledgeGraph, Triple};
pub use train::{TrainConfig, TrainMode, TrainOutcome};
