//! Dense 2-D tensors with tape-based reverse-mode differentiation.
//!
//! Everything is 64-bit floats. A [`GradientTape`] records the forward
//! computation as a topologically ordered list of nodes; [`GradientTape::backward`]
//! walks the list once in reverse and accumulates gradients for every node,
//! so one finite-difference harness ([`gradcheck`]) covers every operation.

mod adam;
mod gradcheck;
mod init;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{central_difference_gradient, max_relative_error};
pub use init::xavier_init;
pub use tape::{GradientTape, Gradients, NodeId};
pub use tensor::{cosine_matrix_values, row_softmax_values, select_rows, Tensor};

use thiserror::Error;

/// Errors raised by tensor and tape operations.
#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{op}: shape mismatch ({details})")]
    ShapeMismatch { op: &'static str, details: String },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },
}

impl DiffError {
    pub(crate) fn shape(op: &'static str, details: impl Into<String>) -> Self {
        DiffError::ShapeMismatch {
            op,
            details: details.into(),
        }
    }

    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        DiffError::Invalid {
            op,
            msg: msg.into(),
        }
    }
}
