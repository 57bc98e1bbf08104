use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::network::check_normalized;
use super::ModelError;
use crate::ingest::{WindowSample, NUM_FEATURES, WINDOW};

/// Name used for the linear baseline in model files and reports.
pub const LINEAR_NAME: &str = "lr";

/// Ridge term added to the normal equations.
pub const RIDGE: f64 = 1e-8;

/// Relative Cholesky pivot below which an unregularized system counts as singular.
const SINGULAR_PIVOT: f64 = 1e-7;

pub const INPUTS: usize = WINDOW * NUM_FEATURES;

/// Ordinary least squares over the flattened `5 × 21` window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn zeros() -> Self {
        Self {
            weights: vec![0.0; INPUTS],
            intercept: 0.0,
        }
    }

    pub fn predict_flat(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>, ModelError> {
        samples
            .iter()
            .map(|s| {
                check_normalized(s)?;
                Ok(self.predict_flat(&s.flat_features()))
            })
            .collect()
    }

    /// Mean squared error of the raw predictions.
    pub fn training_mse(&self, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (self.predict_flat(x) - y).powi(2))
            .sum();
        total / xs.len() as f64
    }
}

fn design(samples: &[WindowSample]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let xs = samples.iter().map(WindowSample::flat_features).collect();
    let ys = samples.iter().map(|s| f64::from(s.y)).collect();
    (xs, ys)
}

pub fn fit_linear(train: &[WindowSample]) -> Result<LinearModel, ModelError> {
    let (xs, ys) = design(train);
    fit_linear_ridge(&xs, &ys, RIDGE)
}

/// Solves `(XᵀX + λI) w = Xᵀy` with an appended intercept column. The intercept is not penalized.
pub fn fit_linear_ridge(xs: &[Vec<f64>], ys: &[f64], ridge: f64) -> Result<LinearModel, ModelError> {
    let n = check_design(xs, ys)?;
    let d = n + 1;
    let mut xtx = DMatrix::<f64>::zeros(d, d);
    let mut xty = DVector::<f64>::zeros(d);
    let mut row = vec![1.0; d];
    for (x, &y) in xs.iter().zip(ys) {
        row[..n].copy_from_slice(x);
        for i in 0..d {
            xty[i] += row[i] * y;
            for j in i..d {
                xtx[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            xtx[(i, j)] = xtx[(j, i)];
        }
    }
    for i in 0..n {
        xtx[(i, i)] += ridge;
    }
    let chol = xtx.cholesky().ok_or_else(|| {
        ModelError::Degenerate(format!("normal equations are singular with ridge {ridge}"))
    })?;
    if ridge <= 0.0 {
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if lo <= SINGULAR_PIVOT * hi {
            return Err(ModelError::Degenerate("normal equations are rank deficient".into()));
        }
    }
    let sol = chol.solve(&xty);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::Degenerate("non-finite least-squares solution".into()));
    }
    Ok(LinearModel {
        weights: sol.as_slice()[..n].to_vec(),
        intercept: sol[n],
    })
}

fn check_design(xs: &[Vec<f64>], ys: &[f64]) -> Result<usize, ModelError> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(ModelError::Degenerate(format!(
            "{} inputs and {} targets",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs[0].len();
    if xs.iter().any(|x| x.len() != n) {
        return Err(ModelError::Degenerate("ragged design matrix".into()));
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig {
    pub max_iters: usize,
    /// Stop once the gradient's max-norm drops below this.
    pub tol: f64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            tol: 1e-10,
        }
    }
}

/// Full-batch gradient descent on the training MSE with step `1/L`, where `L` bounds the
/// curvature (estimated by power iteration).
pub fn fit_linear_gd(xs: &[Vec<f64>], ys: &[f64], config: GdConfig) -> Result<LinearModel, ModelError> {
    let n = check_design(xs, ys)?;
    let k = xs.len() as f64;
    let d = n + 1;
    let augmented = |x: &[f64], j: usize| if j < n { x[j] } else { 1.0 };

    // Largest eigenvalue of (2/k)·XᵀX.
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lipschitz = 0.0;
    for _ in 0..200 {
        let mut next = vec![0.0; d];
        for x in xs {
            let xv: f64 = (0..d).map(|j| augmented(x, j) * v[j]).sum();
            for (j, acc) in next.iter_mut().enumerate() {
                *acc += 2.0 / k * augmented(x, j) * xv;
            }
        }
        let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lipschitz = norm;
        v = next.into_iter().map(|a| a / norm).collect();
    }
    if lipschitz == 0.0 {
        return Err(ModelError::Degenerate("zero design matrix".into()));
    }
    let step = 1.0 / (1.05 * lipschitz);

    let mut theta = vec![0.0; d];
    let mut grad = vec![0.0; d];
    for _ in 0..config.max_iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, y) in xs.iter().zip(ys) {
            let r: f64 = (0..d).map(|j| augmented(x, j) * theta[j]).sum::<f64>() - y;
            for (j, g) in grad.iter_mut().enumerate() {
                *g += 2.0 / k * r * augmented(x, j);
            }
        }
        if grad.iter().all(|g| g.abs() < config.tol) {
            break;
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= step * g;
        }
    }
    Ok(LinearModel {
        weights: theta[..n].to_vec(),
        intercept: theta[n],
    })
}
