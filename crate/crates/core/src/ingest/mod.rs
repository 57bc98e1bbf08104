//! Player-season ingestion: CSV parsing, the low-playing-time filter, moving-window samples,
//! year-keyed splits and feature normalization.

mod artifact;
mod normalize;
mod parse;
mod window;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use artifact::{read_artifact, read_artifact_from, write_artifact, write_artifact_to, ARTIFACT_FORMAT, ARTIFACT_VERSION};
pub use normalize::{fit_normalizer, Normalizer};
pub use parse::{body_warnings, parse_seasons, parse_seasons_from_path, CSV_HEADER};
pub use window::{
    build_windows, counts_by_target_year, split, split_by_target_year, published_split_counts, Split,
    SplitSpec,
};

/// Seasons per input window.
pub const WINDOW: usize = 5;
/// Features per season.
pub const NUM_FEATURES: usize = 21;

/// Feature names in column order (the CSV header minus `player_id`).
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "season", "age", "height", "weight", "hr", "hit", "so", "r", "2b", "3b", "sb", "cs", "g", "sf",
    "ibb", "gidp", "hbp", "pa", "rbi", "bb", "sh",
];

pub mod feature {
    pub const SEASON: usize = 0;
    pub const HR: usize = 4;
    pub const SF: usize = 13;
    pub const HBP: usize = 16;
    pub const PA: usize = 17;
    pub const BB: usize = 19;
    pub const SH: usize = 20;
}

/// Seasons below this many plate appearances are dropped when the player hit no home runs.
pub const MIN_PLATE_APPEARANCES: u32 = 50;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: duplicate season {season} for player {player_id:?}")]
    Duplicate {
        line: u64,
        player_id: String,
        season: i32,
    },
    #[error("no samples with target year {0}")]
    EmptyTest(i32),
    #[error("training split is empty")]
    EmptyTrain,
    #[error("artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One player's batting line for one season.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerSeason {
    pub player_id: String,
    pub season: i32,
    pub age: f64,
    pub height: f64,
    pub weight: f64,
    pub hr: u32,
    pub hit: u32,
    pub strikeout: u32,
    pub runs: u32,
    pub doubles: u32,
    pub triples: u32,
    pub sb: u32,
    pub cs: u32,
    pub games: u32,
    pub sf: u32,
    pub ibb: u32,
    pub gidp: u32,
    pub hbp: u32,
    pub pa: u32,
    pub rbi: u32,
    pub bb: u32,
    pub sh: u32,
}

impl PlayerSeason {
    /// Feature vector in [`FEATURE_NAMES`] order.
    pub fn features(&self) -> [f64; NUM_FEATURES] {
        [
            self.season as f64,
            self.age,
            self.height,
            self.weight,
            self.hr as f64,
            self.hit as f64,
            self.strikeout as f64,
            self.runs as f64,
            self.doubles as f64,
            self.triples as f64,
            self.sb as f64,
            self.cs as f64,
            self.games as f64,
            self.sf as f64,
            self.ibb as f64,
            self.gidp as f64,
            self.hbp as f64,
            self.pa as f64,
            self.rbi as f64,
            self.bb as f64,
            self.sh as f64,
        ]
    }
}

/// Five consecutive seasons of features and the home-run count of the sixth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub player_id: String,
    pub target_year: i32,
    /// Oldest season first.
    pub x: [[f64; NUM_FEATURES]; WINDOW],
    pub y: u32,
}

impl WindowSample {
    /// The five input seasons, oldest first.
    pub fn input_years(&self) -> [i32; WINDOW] {
        std::array::from_fn(|t| self.target_year - (WINDOW - t) as i32)
    }

    /// At-bats implied by each input season: `PA − BB − HBP − SF − SH`, floored at 0.
    /// Only meaningful on raw (unnormalized) samples.
    pub fn at_bats(&self) -> [i64; WINDOW] {
        std::array::from_fn(|t| {
            let row = &self.x[t];
            let ab = row[feature::PA] - row[feature::BB] - row[feature::HBP] - row[feature::SF] - row[feature::SH];
            ab.max(0.0).round() as i64
        })
    }

    /// Home runs of each input season (raw samples only).
    pub fn past_home_runs(&self) -> [i64; WINDOW] {
        std::array::from_fn(|t| self.x[t][feature::HR].round() as i64)
    }

    /// Row-major `WINDOW × NUM_FEATURES` copy of the inputs.
    pub fn flat_features(&self) -> Vec<f64> {
        self.x.iter().flat_map(|r| r.iter().copied()).collect()
    }
}

/// Drops seasons with fewer than 50 plate appearances and zero home runs, preserving order.
pub fn filter_seasons(seasons: &[PlayerSeason]) -> Vec<PlayerSeason> {
    seasons
        .iter()
        .filter(|s| !(s.pa < MIN_PLATE_APPEARANCES && s.hr == 0))
        .cloned()
        .collect()
}
