use std::collections::{HashMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{EvalError, Prediction, PredictionSet};
use crate::ingest::WindowSample;

pub const EXTERNAL_HEADER: [&str; 3] = ["player_id", "target_year", "prediction"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPrediction {
    pub player_id: String,
    pub target_year: i32,
    pub prediction: f64,
}

/// Predictions from an outside system, not yet joined with ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSet {
    pub source: String,
    pub rows: Vec<ExternalPrediction>,
}

/// Result of joining an [`ExternalSet`] against ground-truth samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Joined {
    pub set: PredictionSet,
    /// External rows with no matching sample.
    pub unmatched: Vec<(String, i32)>,
    /// Samples the external source has no prediction for.
    pub missing: Vec<String>,
}

/// Reads a `player_id,target_year,prediction` CSV with header.
pub fn ingest_external_predictions<R: Read>(reader: R, source: &str) -> Result<ExternalSet, EvalError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
    if header != EXTERNAL_HEADER {
        return Err(EvalError::Schema(format!(
            "expected header {:?}, got {:?}",
            EXTERNAL_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for (i, record) in csv.records().enumerate() {
        let line = i as u64 + 2;
        let record = record?;
        let bad = |message: String| EvalError::Row { line, message };
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", record.len())));
        }
        let player_id = record[0].to_string();
        if player_id.is_empty() {
            return Err(bad("empty player_id".into()));
        }
        let target_year: i32 = record[1]
            .parse()
            .map_err(|_| bad(format!("bad target_year {:?}", &record[1])))?;
        let prediction: f64 = record[2]
            .parse()
            .map_err(|_| bad(format!("bad prediction {:?}", &record[2])))?;
        if !prediction.is_finite() {
            return Err(bad("prediction is not finite".into()));
        }
        if let Some(first) = seen.insert((player_id.clone(), target_year), line) {
            return Err(bad(format!("duplicate of line {first}")));
        }
        rows.push(ExternalPrediction {
            player_id,
            target_year,
            prediction,
        });
    }
    if rows.is_empty() {
        return Err(EvalError::Empty(source.to_string()));
    }
    Ok(ExternalSet {
        source: source.to_string(),
        rows,
    })
}

impl ExternalSet {
    /// Keeps rows that match a sample by `(player_id, target_year)`; items follow `truth` order.
    pub fn join(&self, truth: &[WindowSample]) -> Result<Joined, EvalError> {
        let by_key: HashMap<(&str, i32), f64> = self
            .rows
            .iter()
            .map(|r| ((r.player_id.as_str(), r.target_year), r.prediction))
            .collect();
        let mut items = Vec::new();
        let mut missing = Vec::new();
        for s in truth {
            match by_key.get(&(s.player_id.as_str(), s.target_year)) {
                Some(&p) => items.push(Prediction::new(s.player_id.clone(), s.target_year, s.y, p)),
                None => missing.push(s.player_id.clone()),
            }
        }
        let known: HashSet<(&str, i32)> = truth.iter().map(|s| (s.player_id.as_str(), s.target_year)).collect();
        let unmatched = self
            .rows
            .iter()
            .filter(|r| !known.contains(&(r.player_id.as_str(), r.target_year)))
            .map(|r| (r.player_id.clone(), r.target_year))
            .collect();
        Ok(Joined {
            set: PredictionSet::new(self.source.clone(), items)?,
            unmatched,
            missing,
        })
    }
}
