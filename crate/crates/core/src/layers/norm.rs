//! Batch normalization and inverted dropout.

use rand::Rng;

use super::LayerError;
use crate::ndkernel::{BatchStats, Binding, Graph, NodeId, ParamId, ParamStore, Tensor};

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPS: f64 = 1e-3;

/// Per-channel batch normalization over the last axis. Sequences are normalized with
/// statistics pooled over batch and time.
///
/// Stores four vectors per channel: trainable `gamma`, `beta`, and frozen running mean and
/// variance.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    channels: usize,
    gamma: ParamId,
    beta: ParamId,
    running_mean: ParamId,
    running_var: ParamId,
}

impl BatchNorm {
    pub fn register(store: &mut ParamStore, prefix: &str, channels: usize) -> Result<Self, LayerError> {
        Ok(Self {
            channels,
            gamma: store.insert(format!("{prefix}.gamma"), Tensor::filled(&[channels], 1.0))?,
            beta: store.insert(format!("{prefix}.beta"), Tensor::zeros(&[channels]))?,
            running_mean: store.insert_frozen(format!("{prefix}.running_mean"), Tensor::zeros(&[channels]))?,
            running_var: store
                .insert_frozen(format!("{prefix}.running_var"), Tensor::filled(&[channels], 1.0))?,
        })
    }

    pub fn param_count(channels: usize) -> usize {
        4 * channels
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn gamma(&self) -> ParamId {
        self.gamma
    }

    pub fn beta(&self) -> ParamId {
        self.beta
    }

    pub fn running_mean(&self) -> ParamId {
        self.running_mean
    }

    pub fn running_var(&self) -> ParamId {
        self.running_var
    }

    /// Normalizes `x: [N × C]`. In training mode the batch statistics are returned so the caller
    /// can fold them into the running averages after the step.
    pub fn apply(
        &self,
        g: &mut Graph,
        bind: &Binding,
        store: &ParamStore,
        x: NodeId,
        training: bool,
    ) -> Result<(NodeId, Option<BatchStats>), LayerError> {
        let got = g.value(x).cols();
        if got != self.channels {
            return Err(LayerError::InputWidth {
                expected: self.channels,
                got,
            });
        }
        let running = if training {
            None
        } else {
            Some((
                store.get(self.running_mean).data(),
                store.get(self.running_var).data(),
            ))
        };
        Ok(g.batch_norm(x, bind.node(self.gamma), bind.node(self.beta), BN_EPS, running)?)
    }

    /// Pools timesteps into one `[T·B × C]` batch and splits the result back.
    pub fn apply_seq(
        &self,
        g: &mut Graph,
        bind: &Binding,
        store: &ParamStore,
        xs: &[NodeId],
        training: bool,
    ) -> Result<(Vec<NodeId>, Option<BatchStats>), LayerError> {
        if xs.is_empty() {
            return Err(LayerError::EmptySequence);
        }
        let batch = g.value(xs[0]).rows();
        let stacked = g.concat_rows(xs)?;
        let (y, stats) = self.apply(g, bind, store, stacked, training)?;
        let out = (0..xs.len())
            .map(|t| g.slice_rows(y, t * batch, batch))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((out, stats))
    }

    /// `running ← momentum·running + (1 − momentum)·batch`.
    pub fn update_running(&self, store: &mut ParamStore, stats: &BatchStats) {
        for (r, b) in store.values_mut(self.running_mean).iter_mut().zip(&stats.mean) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
        }
        for (r, b) in store.values_mut(self.running_var).iter_mut().zip(&stats.var) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
        }
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else `1 / (1 − rate)`.
pub fn dropout_mask(rng: &mut impl Rng, len: usize, rate: f64) -> Result<Vec<f64>, LayerError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(LayerError::DropoutRate(rate));
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

/// Identity at inference or when `rate` is zero.
pub fn dropout(
    g: &mut Graph,
    x: NodeId,
    rate: f64,
    training: bool,
    rng: &mut impl Rng,
) -> Result<NodeId, LayerError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(LayerError::DropoutRate(rate));
    }
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let len = g.value(x).len();
    let mask = dropout_mask(rng, len, rate)?;
    Ok(g.mul_const(x, Tensor::new(vec![len], mask)?)?)
}

pub fn dropout_values(x: &[f64], rate: f64, training: bool, rng: &mut impl Rng) -> Result<Vec<f64>, LayerError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(LayerError::DropoutRate(rate));
    }
    if !training || rate == 0.0 {
        return Ok(x.to_vec());
    }
    let mask = dropout_mask(rng, x.len(), rate)?;
    Ok(x.iter().zip(mask).map(|(v, m)| v * m).collect())
}
