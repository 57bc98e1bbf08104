//! Differentiable layers built on the [`crate::ndkernel`] tape.

mod attention;
mod dense;
pub mod init;
mod norm;
mod recurrent;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ndkernel::KernelError;

pub use attention::{AdditiveAttention, AttentionNodes};
pub use dense::{flatten, Activation, Dense};
pub use norm::{dropout, dropout_mask, dropout_values, BatchNorm, BN_EPS, BN_MOMENTUM};
pub use recurrent::{
    run_sequence, BiLstm, GruCell, LstmCell, LstmState, LstmStep, LstmStepNodes, Recurrent, RnnCell,
    SeqMode,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayerError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("sequence must contain at least one timestep")]
    EmptySequence,
    #[error("expected input width {expected}, got {got}")]
    InputWidth { expected: usize, got: usize },
    #[error("dropout rate {0} outside [0, 1)")]
    DropoutRate(f64),
}

/// What the attention layer hands to the next layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionOutput {
    /// `Σ_t α_t·h_t`, a single vector.
    Context,
    /// The sequence `α_t·h_t`.
    Reweighted,
}

/// Declarative description of one layer. Widths of inputs are inferred when a model is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Rnn { units: usize, return_sequences: bool },
    Lstm { units: usize, return_sequences: bool },
    Gru { units: usize, return_sequences: bool },
    Bilstm { units: usize, return_sequences: bool },
    Attention { output: AttentionOutput },
    Dense { units: usize, activation: Activation },
    TdDense { units: usize, activation: Activation },
    Flatten,
    Dropout { rate: f64 },
    /// Channels on the last axis.
    Batchnorm,
    Relu,
}

impl LayerSpec {
    pub fn lstm(units: usize) -> Self {
        Self::Lstm {
            units,
            return_sequences: true,
        }
    }

    pub fn gru(units: usize) -> Self {
        Self::Gru {
            units,
            return_sequences: true,
        }
    }

    pub fn bilstm(units: usize) -> Self {
        Self::Bilstm {
            units,
            return_sequences: true,
        }
    }

    pub fn dense(units: usize) -> Self {
        Self::Dense {
            units,
            activation: Activation::Relu,
        }
    }

    /// Layer width for recurrent and dense layers.
    pub fn units(&self) -> Option<usize> {
        match self {
            Self::Rnn { units, .. }
            | Self::Lstm { units, .. }
            | Self::Gru { units, .. }
            | Self::Bilstm { units, .. }
            | Self::Dense { units, .. }
            | Self::TdDense { units, .. } => Some(*units),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Rnn { .. } => "rnn",
            Self::Lstm { .. } => "lstm",
            Self::Gru { .. } => "gru",
            Self::Bilstm { .. } => "bilstm",
            Self::Attention { .. } => "attention",
            Self::Dense { .. } => "dense",
            Self::TdDense { .. } => "td_dense",
            Self::Flatten => "flatten",
            Self::Dropout { .. } => "dropout",
            Self::Batchnorm => "batchnorm",
            Self::Relu => "relu",
        }
    }
}
