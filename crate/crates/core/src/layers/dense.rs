use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::{glorot_uniform, zeros_bias};
use super::LayerError;
use crate::ndkernel::{Binding, Graph, NodeId, ParamId, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: NodeId) -> Result<NodeId, LayerError> {
        Ok(match self {
            Activation::Linear => x,
            Activation::Relu => g.relu(x)?,
            Activation::Tanh => g.tanh(x)?,
            Activation::Sigmoid => g.sigmoid(x)?,
        })
    }
}

/// `y = act(W·x + b)` with `W: units × inputs`.
#[derive(Debug, Clone)]
pub struct Dense {
    inputs: usize,
    units: usize,
    activation: Activation,
    w: ParamId,
    b: ParamId,
}

impl Dense {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        inputs: usize,
        units: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self, LayerError> {
        Ok(Self {
            inputs,
            units,
            activation,
            w: store.insert(format!("{prefix}.w"), glorot_uniform(rng, units, inputs))?,
            b: store.insert(format!("{prefix}.b"), zeros_bias(units))?,
        })
    }

    pub fn param_count(inputs: usize, units: usize) -> usize {
        inputs * units + units
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn bias(&self) -> ParamId {
        self.b
    }

    pub fn apply(&self, g: &mut Graph, bind: &Binding, x: NodeId) -> Result<NodeId, LayerError> {
        let got = g.value(x).cols();
        if got != self.inputs {
            return Err(LayerError::InputWidth {
                expected: self.inputs,
                got,
            });
        }
        let y = g.linear(x, bind.node(self.w), Some(bind.node(self.b)))?;
        self.activation.apply(g, y)
    }

    /// Same weights at every timestep.
    pub fn apply_seq(&self, g: &mut Graph, bind: &Binding, xs: &[NodeId]) -> Result<Vec<NodeId>, LayerError> {
        xs.iter().map(|&x| self.apply(g, bind, x)).collect()
    }

    pub fn apply_values(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>, LayerError> {
        let mut g = Graph::new();
        let bind = g.bind(store)?;
        let xn = g.input(Tensor::row(x))?;
        let y = self.apply(&mut g, &bind, xn)?;
        Ok(g.value(y).data().to_vec())
    }
}

/// Concatenates timesteps oldest first: `T × [B × m] → [B × T·m]`.
pub fn flatten(g: &mut Graph, xs: &[NodeId]) -> Result<NodeId, LayerError> {
    if xs.is_empty() {
        return Err(LayerError::EmptySequence);
    }
    Ok(g.concat_cols(xs)?)
}
