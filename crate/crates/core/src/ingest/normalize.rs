use serde::{Deserialize, Serialize};

use super::{IngestError, WindowSample, NUM_FEATURES};

/// Standard deviations below this are treated as constant features.
const MIN_STD: f64 = 1e-12;

/// Per-feature z-scoring with statistics pooled over every timestep of the training samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant features store 1 so they map to 0.
    pub std: Vec<f64>,
}

pub fn fit_normalizer(train: &[WindowSample]) -> Result<Normalizer, IngestError> {
    if train.is_empty() {
        return Err(IngestError::EmptyTrain);
    }
    let n = (train.len() * train[0].x.len()) as f64;
    let mut mean = vec![0.0; NUM_FEATURES];
    for row in train.iter().flat_map(|s| s.x.iter()) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; NUM_FEATURES];
    for row in train.iter().flat_map(|s| s.x.iter()) {
        for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let std = var
        .iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s < MIN_STD {
                1.0
            } else {
                s
            }
        })
        .collect();
    Ok(Normalizer { mean, std })
}

impl Normalizer {
    pub fn apply(&self, samples: &[WindowSample]) -> Vec<WindowSample> {
        samples
            .iter()
            .map(|s| {
                let mut out = s.clone();
                for row in out.x.iter_mut() {
                    for (k, v) in row.iter_mut().enumerate() {
                        *v = (*v - self.mean[k]) / self.std[k];
                    }
                }
                out
            })
            .collect()
    }

    pub fn invert(&self, samples: &[WindowSample]) -> Vec<WindowSample> {
        samples
            .iter()
            .map(|s| {
                let mut out = s.clone();
                for row in out.x.iter_mut() {
                    for (k, v) in row.iter_mut().enumerate() {
                        *v = *v * self.std[k] + self.mean[k];
                    }
                }
                out
            })
            .collect()
    }
}
