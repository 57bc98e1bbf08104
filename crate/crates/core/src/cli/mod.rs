//! Command-line interface: argument parsing, config-file merging and the four subcommands.

mod commands;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::EvalError;
use crate::ingest::IngestError;
use crate::models::ModelError;
use crate::train::TrainError;

pub use commands::{run, run_evaluate, run_ingest, run_predict, run_train};

/// Environment variable that sets the default output root.
pub const OUT_ENV: &str = "HRSEQ_OUT";
pub const DEFAULT_OUT: &str = "hrseq-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config file {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(name = "hrseq", version, about = "Train and evaluate next-season home-run models")]
pub struct Cli {
    /// TOML file with default option values; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a season CSV, filter it and write the window dataset artifact.
    Ingest(IngestArgs),
    /// Train one model on a year-keyed split.
    Train(TrainArgs),
    /// Evaluate model files and external predictions on one test year.
    Evaluate(EvaluateArgs),
    /// Print per-player case views.
    Predict(PredictArgs),
}

#[derive(Debug, Args, Default)]
pub struct IngestArgs {
    #[arg(long, value_name = "CSV")]
    pub input: Option<PathBuf>,
    /// Dataset artifact to write.
    #[arg(long, value_name = "ARTIFACT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long, value_name = "ARTIFACT")]
    pub data: Option<PathBuf>,
    /// Built-in architecture (A-E, gru, bilstm, at_lstm, nn) or `lr` for linear regression.
    #[arg(long)]
    pub model: Option<String>,
    /// Test year; training uses earlier target years.
    #[arg(long)]
    pub year: Option<i32>,
    /// Also train on held-out years before `--year`.
    #[arg(long)]
    pub retrain_prior: bool,
    /// First held-out year; without `--retrain-prior` training stops before it.
    #[arg(long)]
    pub holdout_start: Option<i32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Continue from this model file instead of a fresh initialization.
    #[arg(long, value_name = "FILE")]
    pub warm_start: Option<PathBuf>,
    /// Output root (default: $HRSEQ_OUT, then `hrseq-out`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct EvaluateArgs {
    #[arg(long = "model", value_name = "FILE", num_args = 1..)]
    pub models: Vec<PathBuf>,
    #[arg(long, value_name = "ARTIFACT")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub year: Option<i32>,
    /// External predictions as `PATH` or `LABEL=PATH`.
    #[arg(long = "external", value_name = "CSV", num_args = 1..)]
    pub externals: Vec<String>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct PredictArgs {
    #[arg(long = "model", value_name = "FILE", num_args = 1..)]
    pub models: Vec<PathBuf>,
    #[arg(long, value_name = "ARTIFACT")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub year: Option<i32>,
    #[arg(long = "player", value_name = "ID", num_args = 1..)]
    pub players: Vec<String>,
    #[arg(long = "external", value_name = "CSV", num_args = 1..)]
    pub externals: Vec<String>,
}

/// Keys accepted in a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub model: Option<String>,
    pub models: Option<Vec<PathBuf>>,
    pub year: Option<i32>,
    pub retrain_prior: Option<bool>,
    pub holdout_start: Option<i32>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub checkpoint_every: Option<usize>,
    pub clip_norm: Option<f64>,
    pub warm_start: Option<PathBuf>,
    pub external: Option<Vec<String>>,
    pub players: Option<Vec<String>>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::parse(&read_text(p)?, p),
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// First 12 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..6])
}

/// Flag, then config file, then `$HRSEQ_OUT`, then `hrseq-out`.
pub fn output_root(flag: Option<&Path>, file: &FileConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| file.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub(crate) fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}
