//! Evaluation battery: error metrics, interval accuracy, per-bucket tables, over/under counts,
//! per-player case views and external prediction ingestion.

mod external;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::WindowSample;

pub use external::{ingest_external_predictions, ExternalPrediction, ExternalSet, Joined};
pub use report::{case_view, comparison_table, CaseView, EvalReport};

/// Half-widths of the difference intervals reported by default.
pub const HALF_WIDTHS: [u32; 5] = [0, 1, 3, 5, 10];
/// Half-widths of the per-bucket correct-count tables.
pub const BUCKET_HALF_WIDTHS: [u32; 2] = [1, 3];
/// Differences beyond this count as overflow.
pub const OVERFLOW_THRESHOLD: u32 = 10;
pub const BUCKET_LABELS: [&str; 5] = ["0-9", "10-19", "20-29", "30-39", "40+"];

/// Marker for a source without a value.
pub const MISSING: &str = "×";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction set {0:?} is empty")]
    Empty(String),
    #[error("prediction for player {player_id:?} is not finite")]
    NonFinite { player_id: String },
    #[error("unknown player {0:?}")]
    UnknownPlayer(String),
    #[error("{expected} predictions for {got} samples")]
    Length { expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("external predictions: {0}")]
    Schema(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rounds half away from zero and clamps at 0.
pub fn round_prediction(raw: f64) -> u32 {
    let r = raw.round();
    if r <= 0.0 {
        0
    } else if r >= f64::from(u32::MAX) {
        u32::MAX
    } else {
        r as u32
    }
}

pub fn bucket_of(hr: u32) -> usize {
    (hr / 10).min(4) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub player_id: String,
    pub target_year: i32,
    pub y_true: u32,
    pub y_raw: f64,
    pub y_rounded: u32,
}

impl Prediction {
    pub fn new(player_id: impl Into<String>, target_year: i32, y_true: u32, y_raw: f64) -> Self {
        Self {
            player_id: player_id.into(),
            target_year,
            y_true,
            y_raw,
            y_rounded: round_prediction(y_raw),
        }
    }

    /// `y_rounded − y_true`.
    pub fn diff(&self) -> i64 {
        i64::from(self.y_rounded) - i64::from(self.y_true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub source: String,
    pub items: Vec<Prediction>,
}

impl PredictionSet {
    pub fn new(source: impl Into<String>, items: Vec<Prediction>) -> Result<Self, EvalError> {
        let source = source.into();
        if let Some(p) = items.iter().find(|p| !p.y_raw.is_finite()) {
            return Err(EvalError::NonFinite {
                player_id: p.player_id.clone(),
            });
        }
        Ok(Self { source, items })
    }

    /// Pairs model outputs with the samples they were computed from.
    pub fn from_samples(
        source: impl Into<String>,
        samples: &[WindowSample],
        preds: &[f64],
    ) -> Result<Self, EvalError> {
        if samples.len() != preds.len() {
            return Err(EvalError::Length {
                expected: samples.len(),
                got: preds.len(),
            });
        }
        let items = samples
            .iter()
            .zip(preds)
            .map(|(s, &p)| Prediction::new(s.player_id.clone(), s.target_year, s.y, p))
            .collect();
        Self::new(source, items)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, player_id: &str) -> Option<&Prediction> {
        self.items.iter().find(|p| p.player_id == player_id)
    }

    fn non_empty(&self) -> Result<&[Prediction], EvalError> {
        if self.items.is_empty() {
            Err(EvalError::Empty(self.source.clone()))
        } else {
            Ok(&self.items)
        }
    }
}

pub fn mae(set: &PredictionSet) -> Result<f64, EvalError> {
    let items = set.non_empty()?;
    let total: f64 = items.iter().map(|p| (f64::from(p.y_true) - p.y_raw).abs()).sum();
    Ok(total / items.len() as f64)
}

pub fn rmse(set: &PredictionSet) -> Result<f64, EvalError> {
    let items = set.non_empty()?;
    let total: f64 = items
        .iter()
        .map(|p| (f64::from(p.y_true) - p.y_raw).powi(2))
        .sum();
    Ok((total / items.len() as f64).sqrt())
}

/// Number of samples whose rounded difference lies in `[−k, k]`.
pub fn within_count(set: &PredictionSet, k: u32) -> Result<usize, EvalError> {
    let items = set.non_empty()?;
    Ok(items.iter().filter(|p| p.diff().unsigned_abs() <= u64::from(k)).count())
}

/// Percentage of samples whose rounded difference lies in `[−k, k]`.
pub fn interval_accuracy(set: &PredictionSet, k: u32) -> Result<f64, EvalError> {
    Ok(100.0 * within_count(set, k)? as f64 / set.len() as f64)
}

/// Counts per true-HR bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts(pub [usize; 5]);

impl BucketCounts {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

fn bucket_count(set: &PredictionSet, keep: impl Fn(&Prediction) -> bool) -> Result<BucketCounts, EvalError> {
    let mut counts = [0; 5];
    for p in set.non_empty()?.iter().filter(|p| keep(p)) {
        counts[bucket_of(p.y_true)] += 1;
    }
    Ok(BucketCounts(counts))
}

/// The GT row: bucket sizes by true home runs.
pub fn ground_truth_counts(set: &PredictionSet) -> Result<BucketCounts, EvalError> {
    bucket_count(set, |_| true)
}

/// Correct predictions under `[−k, k]` per true-HR bucket.
pub fn class_bucket_table(set: &PredictionSet, k: u32) -> Result<BucketCounts, EvalError> {
    bucket_count(set, |p| p.diff().unsigned_abs() <= u64::from(k))
}

/// Predictions off by more than ten per true-HR bucket.
pub fn overflow_table(set: &PredictionSet) -> Result<BucketCounts, EvalError> {
    bucket_count(set, |p| p.diff().unsigned_abs() > u64::from(OVERFLOW_THRESHOLD))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overview {
    pub over: usize,
    pub exact: usize,
    pub under: usize,
}

/// Over-, exactly and under-estimated counts on rounded predictions.
pub fn estimation_overview(set: &PredictionSet) -> Result<Overview, EvalError> {
    let mut o = Overview {
        over: 0,
        exact: 0,
        under: 0,
    };
    for p in set.non_empty()? {
        match p.diff().signum() {
            1 => o.over += 1,
            0 => o.exact += 1,
            _ => o.under += 1,
        }
    }
    Ok(o)
}

#[cfg(test)]
mod tests;
