use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{
    class_bucket_table, estimation_overview, ground_truth_counts, interval_accuracy, mae,
    overflow_table, rmse, within_count, BucketCounts, EvalError, Overview, PredictionSet,
    BUCKET_HALF_WIDTHS, BUCKET_LABELS, HALF_WIDTHS, MISSING,
};
use crate::ingest::{WindowSample, WINDOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub half_width: u32,
    pub correct: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub half_width: u32,
    pub correct: BucketCounts,
}

/// Every metric and table for one prediction source on one test year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub source: String,
    pub year: i32,
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    pub intervals: Vec<IntervalRow>,
    pub ground_truth: BucketCounts,
    pub correct_by_bucket: Vec<BucketRow>,
    pub overflow: BucketCounts,
    pub overview: Overview,
    /// External rows that matched no test sample.
    pub unmatched: Option<usize>,
}

impl EvalReport {
    pub fn build(set: &PredictionSet, year: i32) -> Result<Self, EvalError> {
        let intervals = HALF_WIDTHS
            .iter()
            .map(|&k| {
                Ok(IntervalRow {
                    half_width: k,
                    correct: within_count(set, k)?,
                    percent: interval_accuracy(set, k)?,
                })
            })
            .collect::<Result<_, EvalError>>()?;
        let correct_by_bucket = BUCKET_HALF_WIDTHS
            .iter()
            .map(|&k| {
                Ok(BucketRow {
                    half_width: k,
                    correct: class_bucket_table(set, k)?,
                })
            })
            .collect::<Result<_, EvalError>>()?;
        Ok(Self {
            source: set.source.clone(),
            year,
            n: set.len(),
            mae: mae(set)?,
            rmse: rmse(set)?,
            intervals,
            ground_truth: ground_truth_counts(set)?,
            correct_by_bucket,
            overflow: overflow_table(set)?,
            overview: estimation_overview(set)?,
            unmatched: None,
        })
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "source {}  year {}  n {}", self.source, self.year, self.n);
        if let Some(u) = self.unmatched {
            let _ = writeln!(out, "unmatched external rows {u}");
        }
        let _ = writeln!(out, "MAE {:.4}  RMSE {:.4}", self.mae, self.rmse);
        out.push('\n');

        out.push_str("Accuracy rate in each difference interval\n");
        let mut head = String::new();
        let mut vals = String::new();
        for row in &self.intervals {
            let label = format!("[-{0},{0}]", row.half_width);
            let _ = write!(head, "{label:>10}");
            let _ = write!(vals, "{:>9.2}%", row.percent);
        }
        let _ = writeln!(out, "{head}\n{vals}\n");

        out.push_str("Number of correct predictions by home-run class\n");
        let _ = write!(out, "{:<8}", "");
        for label in BUCKET_LABELS {
            let _ = write!(out, "{label:>7}");
        }
        out.push('\n');
        let mut table_row = |name: String, counts: &BucketCounts| {
            let _ = write!(out, "{name:<8}");
            for c in counts.0 {
                let _ = write!(out, "{c:>7}");
            }
            out.push('\n');
        };
        table_row("GT".into(), &self.ground_truth);
        for row in &self.correct_by_bucket {
            table_row(format!("[-{0},{0}]", row.half_width), &row.correct);
        }
        table_row(">10".into(), &self.overflow);
        out.push('\n');

        out.push_str("Predictions overview\n");
        let _ = writeln!(out, "{:>7}{:>7}{:>7}", "over", "exact", "under");
        let o = &self.overview;
        let _ = writeln!(out, "{:>7}{:>7}{:>7}", o.over, o.exact, o.under);
        out
    }
}

/// One row per source: sample count, MAE, RMSE and every interval accuracy.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.source.chars().count())
        .max()
        .unwrap_or(0)
        .max(6);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}{:>6}{:>9}{:>9}", "source", "n", "MAE", "RMSE");
    for k in HALF_WIDTHS {
        let _ = write!(out, "{:>10}", format!("[-{k},{k}]"));
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<width$}{:>6}{:>9.4}{:>9.4}", r.source, r.n, r.mae, r.rmse);
        for row in &r.intervals {
            let _ = write!(out, "{:>9.2}%", row.percent);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub player_id: String,
    pub target_year: i32,
    pub ground_truth: u32,
    /// Rounded prediction per source, `None` when the source lacks the player.
    pub predictions: Vec<Option<u32>>,
    pub years: [i32; WINDOW],
    pub home_runs: [i64; WINDOW],
    pub at_bats: [i64; WINDOW],
}

/// Per-player comparison of sources plus the five seasons feeding each prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseView {
    pub sources: Vec<String>,
    pub rows: Vec<CaseRow>,
}

/// Builds case views from raw (unnormalized) test samples.
pub fn case_view(
    sets: &[&PredictionSet],
    truth: &[WindowSample],
    player_ids: &[String],
) -> Result<CaseView, EvalError> {
    let rows = player_ids
        .iter()
        .map(|id| {
            let s = truth
                .iter()
                .find(|s| &s.player_id == id)
                .ok_or_else(|| EvalError::UnknownPlayer(id.clone()))?;
            Ok(CaseRow {
                player_id: id.clone(),
                target_year: s.target_year,
                ground_truth: s.y,
                predictions: sets.iter().map(|set| set.get(id).map(|p| p.y_rounded)).collect(),
                years: s.input_years(),
                home_runs: s.past_home_runs(),
                at_bats: s.at_bats(),
            })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(CaseView {
        sources: sets.iter().map(|s| s.source.clone()).collect(),
        rows,
    })
}

impl CaseView {
    pub fn render(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.player_id.chars().count())
            .max()
            .unwrap_or(0)
            .max(6);
        let cell = |s: &str| s.chars().count().max(4) + 2;
        let mut out = String::new();
        let _ = write!(out, "{:<width$}{:>6}", "player", "GT");
        for s in &self.sources {
            let _ = write!(out, "{s:>w$}", w = cell(s));
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<width$}{:>6}", r.player_id, r.ground_truth);
            for (s, p) in self.sources.iter().zip(&r.predictions) {
                let v = p.map_or_else(|| MISSING.to_string(), |v| v.to_string());
                let _ = write!(out, "{v:>w$}", w = cell(s));
            }
            out.push('\n');
        }
        out.push_str("\nPrevious performance\n");
        for r in &self.rows {
            let _ = write!(out, "{:<width$}{:>6}", r.player_id, "year");
            for y in r.years {
                let _ = write!(out, "{y:>6}");
            }
            out.push('\n');
            for (label, vals) in [("HR", &r.home_runs), ("AB", &r.at_bats)] {
                let _ = write!(out, "{:<width$}{label:>6}", "");
                for v in vals {
                    let _ = write!(out, "{v:>6}");
                }
                out.push('\n');
            }
        }
        out
    }
}
