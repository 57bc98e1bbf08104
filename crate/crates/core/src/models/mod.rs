//! Network architectures, the linear baseline, inference and the model file container.

pub mod io;
mod linear;
mod network;
mod spec;

use thiserror::Error;

use crate::ingest::WindowSample;
use crate::layers::LayerError;
use crate::ndkernel::KernelError;

pub use io::{load_model, read_model, save_model, write_model, ModelFile, SavedModel};
pub use linear::{fit_linear, fit_linear_gd, fit_linear_ridge, GdConfig, LinearModel, LINEAR_NAME, RIDGE};
pub use network::{Forward, Model};
pub use spec::{builtin_spec, ModelSpec, Shape, BUILTIN_NAMES};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("unknown model {name:?}; valid names: {valid}")]
    UnknownModel { name: String, valid: String },
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("input for player {player_id:?} looks unnormalized (feature value {value})")]
    Unnormalized { player_id: String, value: f64 },
    #[error("parameter layout mismatch: {0}")]
    ParamLayout(String),
    #[error("degenerate system: {0}")]
    Degenerate(String),
    #[error("not a model file: {0}")]
    Format(String),
    #[error("model file version {found} not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model file checksum mismatch (file is corrupt or truncated)")]
    Checksum,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Anything that maps window samples to home-run estimates.
pub trait Predictor {
    fn name(&self) -> &str;
    fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>, ModelError>;
}

impl Predictor for Model {
    fn name(&self) -> &str {
        &self.spec().name
    }

    fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>, ModelError> {
        Model::predict(self, samples)
    }
}

impl Predictor for LinearModel {
    fn name(&self) -> &str {
        LINEAR_NAME
    }

    fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>, ModelError> {
        LinearModel::predict(self, samples)
    }
}
