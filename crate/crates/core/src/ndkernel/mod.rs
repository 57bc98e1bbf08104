//! Dense `f64` tensors, a reverse-mode tape and a finite-difference checker.

mod gradcheck;
mod graph;
mod params;
mod tensor;

use thiserror::Error;

pub use gradcheck::{
    analytic_gradient, evaluate, finite_diff_check, numeric_gradient, relative_error, GradCheck,
    DEFAULT_EPS,
};
pub use graph::{BatchStats, Binding, Gradients, Graph, NodeId};
pub use params::{Param, ParamId, ParamStore};
pub use tensor::{relu, sigmoid, tanh, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} values")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: range {start}+{len} exceeds size {size}")]
    OutOfRange {
        op: &'static str,
        start: usize,
        len: usize,
        size: usize,
    },
    #[error("{0}: empty input")]
    EmptyInput(&'static str),
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("loss must be scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("loss node was not recorded on this tape")]
    UnrecordedTape,
    #[error("duplicate parameter name {0:?}")]
    DuplicateParam(String),
    #[error("batch normalization in training mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
}
