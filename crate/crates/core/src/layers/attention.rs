use rand::Rng;

use super::init::{glorot_uniform, zeros_bias};
use super::LayerError;
use crate::ndkernel::{Binding, Graph, NodeId, ParamId, ParamStore, Tensor};

/// Additive attention over a hidden-state sequence:
/// `e_t = vᵀ·tanh(W·h_t + b)`, `α = softmax(e)`.
#[derive(Debug, Clone)]
pub struct AdditiveAttention {
    width: usize,
    w: ParamId,
    b: ParamId,
    v: ParamId,
}

/// Weights and the two reductions built from them.
#[derive(Debug, Clone)]
pub struct AttentionNodes {
    /// `[B × T]`, each row sums to one.
    pub weights: NodeId,
    /// `α_t·h_t` for every step.
    pub reweighted: Vec<NodeId>,
    /// `Σ_t α_t·h_t`.
    pub context: NodeId,
}

impl AdditiveAttention {
    /// `width` is both the hidden-state width and the scoring width.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        width: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, LayerError> {
        Ok(Self {
            width,
            w: store.insert(format!("{prefix}.w"), glorot_uniform(rng, width, width))?,
            b: store.insert(format!("{prefix}.b"), zeros_bias(width))?,
            v: store.insert(format!("{prefix}.v"), glorot_uniform(rng, 1, width))?,
        })
    }

    pub fn param_count(width: usize) -> usize {
        width * width + 2 * width
    }

    pub fn w(&self) -> ParamId {
        self.w
    }

    pub fn v(&self) -> ParamId {
        self.v
    }

    pub fn apply(&self, g: &mut Graph, bind: &Binding, hs: &[NodeId]) -> Result<AttentionNodes, LayerError> {
        if hs.is_empty() {
            return Err(LayerError::EmptySequence);
        }
        let mut scores = Vec::with_capacity(hs.len());
        for &h in hs {
            let got = g.value(h).cols();
            if got != self.width {
                return Err(LayerError::InputWidth {
                    expected: self.width,
                    got,
                });
            }
            let proj = g.linear(h, bind.node(self.w), Some(bind.node(self.b)))?;
            let act = g.tanh(proj)?;
            scores.push(g.linear(act, bind.node(self.v), None)?);
        }
        let stacked = g.concat_cols(&scores)?;
        let weights = g.softmax_rows(stacked)?;
        let mut reweighted = Vec::with_capacity(hs.len());
        for (t, &h) in hs.iter().enumerate() {
            let alpha = g.slice_cols(weights, t, 1)?;
            reweighted.push(g.mul_column(alpha, h)?);
        }
        let mut context = reweighted[0];
        for &r in &reweighted[1..] {
            context = g.add(context, r)?;
        }
        Ok(AttentionNodes {
            weights,
            reweighted,
            context,
        })
    }

    /// Attention weights and context for a single `T × width` sequence.
    pub fn apply_values(
        &self,
        store: &ParamStore,
        hs: &[Vec<f64>],
    ) -> Result<(Vec<f64>, Vec<f64>), LayerError> {
        let mut g = Graph::new();
        let bind = g.bind(store)?;
        let nodes = hs
            .iter()
            .map(|h| g.input(Tensor::row(h)))
            .collect::<Result<Vec<_>, _>>()?;
        let out = self.apply(&mut g, &bind, &nodes)?;
        Ok((
            g.value(out.weights).data().to_vec(),
            g.value(out.context).data().to_vec(),
        ))
    }
}
