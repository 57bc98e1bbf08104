//! Mini-batch training: MSE loss, bias-corrected Adam, seeded shuffling and loss history.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::WindowSample;
use crate::models::{Model, ModelError};
use crate::layers::LayerError;
use crate::ndkernel::{BatchStats, Graph, KernelError, ParamId, ParamStore, Tensor};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrain,
    #[error("mse needs equal non-empty inputs, got {preds} predictions and {targets} targets")]
    Lengths { preds: usize, targets: usize },
    #[error("{what} shape mismatch for parameter {index}")]
    Shape { what: &'static str, index: usize },
    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl From<KernelError> for TrainError {
    fn from(e: KernelError) -> Self {
        TrainError::Model(ModelError::Kernel(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Save a checkpoint every this many epochs; 0 disables checkpoints.
    pub checkpoint_every: usize,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            learning_rate: 1e-3,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            checkpoint_every: 0,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return bad("clip norm must be positive");
        }
        Ok(())
    }
}

/// Adam moments, one tensor per [`ParamStore`] entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        Self {
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

pub fn mse(preds: &[f64], targets: &[f64]) -> Result<f64, TrainError> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(TrainError::Lengths {
            preds: preds.len(),
            targets: targets.len(),
        });
    }
    let total: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(total / preds.len() as f64)
}

/// One bias-corrected Adam update of every trainable parameter.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &[Tensor],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<(), TrainError> {
    if grads.len() != store.len() || state.m.len() != store.len() || state.v.len() != store.len() {
        return Err(TrainError::Shape {
            what: "gradient list",
            index: grads.len().min(state.m.len()),
        });
    }
    for (i, p) in store.iter().enumerate() {
        if grads[i].shape() != p.value.shape() {
            return Err(TrainError::Shape { what: "gradient", index: i });
        }
        if state.m[i].shape() != p.value.shape() || state.v[i].shape() != p.value.shape() {
            return Err(TrainError::Shape { what: "moment", index: i });
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let trainable: Vec<bool> = store.iter().map(|p| p.trainable).collect();
    for (i, &train) in trainable.iter().enumerate() {
        if !train {
            continue;
        }
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let theta = store.values_mut(ParamId(i));
        for j in 0..g.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            theta[j] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
    Ok(())
}

/// Scales all gradients so their global L2 norm is at most `max_norm`. Returns the norm before
/// clipping.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sample-weighted mean of the training-mode batch losses.
    pub mse: f64,
    /// Seconds since training started.
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub seed: u64,
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    pub wall_time: f64,
}

impl TrainHistory {
    pub fn final_mse(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mse)
    }

    /// One JSON record per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("plain record") + "\n")
            .collect()
    }
}

/// State handed to the checkpoint callback.
pub struct Checkpoint<'a> {
    pub epoch: usize,
    pub model: &'a Model,
    pub adam: &'a AdamState,
}

pub fn train(
    model: &mut Model,
    samples: &[WindowSample],
    config: &TrainConfig,
) -> Result<TrainHistory, TrainError> {
    train_with(model, samples, config, None, |_| Ok(()))
}

/// Trains `model` in place. `resume` continues from saved Adam moments. The callback runs every
/// `checkpoint_every` epochs.
pub fn train_with<F>(
    model: &mut Model,
    samples: &[WindowSample],
    config: &TrainConfig,
    resume: Option<AdamState>,
    mut on_checkpoint: F,
) -> Result<TrainHistory, TrainError>
where
    F: FnMut(&Checkpoint) -> Result<(), TrainError>,
{
    config.validate()?;
    if samples.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = resume.unwrap_or_else(|| AdamState::new(model.params()));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = TrainHistory {
        seed: config.seed,
        config: config.clone(),
        epochs: Vec::with_capacity(config.epochs),
        wall_time: 0.0,
    };
    model.set_training(true);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (b, batch) in batches(&order, config.batch_size).into_iter().enumerate() {
            let refs: Vec<&WindowSample> = batch.iter().map(|&i| &samples[i]).collect();
            let targets: Vec<f64> = refs.iter().map(|s| f64::from(s.y)).collect();
            let diverged = |detail: String| TrainError::Diverged {
                epoch,
                batch: b,
                detail,
            };

            let (value, mut grads, bn_stats) = match batch_step(model, &refs, &targets, &mut rng) {
                Err(e) => match non_finite_op(&e) {
                    Some(op) => return Err(diverged(format!("non-finite value in {op}"))),
                    None => return Err(e),
                },
                Ok(step) => step,
            };
            if !value.is_finite() {
                return Err(diverged(format!("loss is {value}")));
            }
            if grads.iter().any(|t| !t.is_finite()) {
                return Err(diverged("non-finite gradient".into()));
            }
            if let Some(c) = config.clip_norm {
                clip_global_norm(&mut grads, c);
            }
            adam_step(model.params_mut(), &grads, &mut adam, config)?;
            model.update_running_stats(&bn_stats);
            weighted += value * refs.len() as f64;
        }
        let mse = weighted / samples.len() as f64;
        log::debug!("epoch {epoch}: mse {mse:.6}");
        history.epochs.push(EpochRecord {
            epoch,
            mse,
            elapsed: start.elapsed().as_secs_f64(),
        });
        if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
            on_checkpoint(&Checkpoint {
                epoch,
                model,
                adam: &adam,
            })?;
        }
    }
    model.set_training(false);
    history.wall_time = start.elapsed().as_secs_f64();
    Ok(history)
}

type StepOutput = (f64, Vec<Tensor>, Vec<(usize, BatchStats)>);

/// Forward, MSE and backward for one batch.
fn batch_step(
    model: &Model,
    refs: &[&WindowSample],
    targets: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<StepOutput, TrainError> {
    let mut g = Graph::new();
    let bind = g.bind(model.params())?;
    let fwd = model.forward(&mut g, &bind, refs, true, rng)?;
    let target = g.input(Tensor::column(targets))?;
    let diff = g.sub(fwd.output, target)?;
    let sq = g.mul(diff, diff)?;
    let loss = g.mean(sq)?;
    let value = g.value(loss).data()[0];
    let grads = g.backward(loss)?.for_store(model.params());
    Ok((value, grads, fwd.bn_stats))
}

fn non_finite_op(e: &TrainError) -> Option<&'static str> {
    match e {
        TrainError::Model(ModelError::Kernel(KernelError::NonFinite { op }))
        | TrainError::Model(ModelError::Layer(LayerError::Kernel(KernelError::NonFinite { op }))) => Some(op),
        _ => None,
    }
}

/// Splits the shuffled order into mini-batches. A trailing batch of one sample is folded into
/// the previous batch so batch statistics are always defined.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() >= 2 && out.last().map(|b| b.len()) == Some(1) {
        let n = out.len();
        let start = (n - 2) * size;
        out.truncate(n - 2);
        out.push(&order[start..]);
    }
    out
}

/// Inference-mode MSE of `model` over `samples`.
pub fn evaluate_mse(model: &Model, samples: &[WindowSample]) -> Result<f64, TrainError> {
    let preds = model.predict(samples)?;
    let targets: Vec<f64> = samples.iter().map(|s| f64::from(s.y)).collect();
    mse(&preds, &targets)
}
