use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{IngestError, PlayerSeason, WindowSample, WINDOW};

/// Slides a six-season window over every run of consecutive seasons per player.
///
/// A missing year ends a run, so a career of `L` consecutive seasons yields `max(0, L − 5)`
/// samples. Output is sorted by `(target_year, player_id)`.
pub fn build_windows(seasons: &[PlayerSeason]) -> Vec<WindowSample> {
    let mut by_player: HashMap<&str, Vec<&PlayerSeason>> = HashMap::new();
    for s in seasons {
        by_player.entry(&s.player_id).or_default().push(s);
    }

    let mut out = Vec::new();
    for (player, mut career) in by_player {
        career.sort_by_key(|s| s.season);
        let span = WINDOW + 1;
        if career.len() < span {
            continue;
        }
        for start in 0..=career.len() - span {
            let window = &career[start..start + span];
            let consecutive = window
                .windows(2)
                .all(|pair| pair[1].season == pair[0].season + 1);
            if !consecutive {
                continue;
            }
            let x = std::array::from_fn(|t| window[t].features());
            out.push(WindowSample {
                player_id: player.to_string(),
                target_year: window[WINDOW].season,
                x,
                y: window[WINDOW].hr,
            });
        }
    }
    out.sort_by(|a, b| {
        a.target_year
            .cmp(&b.target_year)
            .then_with(|| a.player_id.cmp(&b.player_id))
    });
    out
}

pub fn counts_by_target_year(samples: &[WindowSample]) -> BTreeMap<i32, usize> {
    let mut counts = BTreeMap::new();
    for s in samples {
        *counts.entry(s.target_year).or_insert(0) += 1;
    }
    counts
}

/// How a dataset is divided into train and test samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Test samples are exactly those with this target year.
    pub cutoff: i32,
    /// First year of the held-out period. Without `retrain_prior`, training stops before it, so
    /// evaluating a later year reuses the original training set. Defaults to `cutoff`.
    pub holdout_start: Option<i32>,
    /// Fold every target year before `cutoff` (including earlier held-out years) into training.
    pub retrain_prior: bool,
}

impl SplitSpec {
    pub fn new(cutoff: i32, retrain_prior: bool) -> Self {
        Self {
            cutoff,
            holdout_start: None,
            retrain_prior,
        }
    }

    /// Exclusive upper bound on training target years.
    pub fn train_end(&self) -> i32 {
        if self.retrain_prior {
            self.cutoff
        } else {
            self.holdout_start.unwrap_or(self.cutoff).min(self.cutoff)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub spec: SplitSpec,
    pub train: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
}

impl Split {
    pub fn target_year(&self) -> i32 {
        self.spec.cutoff
    }
}

pub fn split_by_target_year(
    samples: &[WindowSample],
    cutoff: i32,
    retrain_prior: bool,
) -> Result<Split, IngestError> {
    split(samples, SplitSpec::new(cutoff, retrain_prior))
}

pub fn split(samples: &[WindowSample], spec: SplitSpec) -> Result<Split, IngestError> {
    let end = spec.train_end();
    let test: Vec<_> = samples
        .iter()
        .filter(|s| s.target_year == spec.cutoff)
        .cloned()
        .collect();
    if test.is_empty() {
        return Err(IngestError::EmptyTest(spec.cutoff));
    }
    let train = samples
        .iter()
        .filter(|s| s.target_year < end)
        .cloned()
        .collect();
    Ok(Split { spec, train, test })
}

/// Published `(train, test)` counts for the reference dataset, keyed by test year.
pub fn published_split_counts(year: i32) -> Option<(usize, usize)> {
    match year {
        2018 => Some((9828, 184)),
        2019 => Some((10006, 191)),
        _ => None,
    }
}
