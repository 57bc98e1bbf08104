//! Vanilla RNN, LSTM, GRU and bidirectional LSTM cells.
//!
//! Weight layout follows the column-vector convention: `W_x⋆` is `units × inputs` and `W_h⋆`
//! is `units × units`, applied to batch rows as `x · Wᵀ`. The initial state is zero.

use rand::Rng;

use super::init::{glorot_uniform, zeros_bias};
use super::LayerError;
use crate::ndkernel::{Binding, Graph, NodeId, ParamId, ParamStore, Tensor};

/// Whether a recurrent layer returns every hidden state or only the last one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqMode {
    AllSteps,
    Last,
}

/// A recurrent layer that can be unrolled over a sequence of `[B × inputs]` nodes.
pub trait Recurrent {
    fn units(&self) -> usize;

    /// Hidden state for every timestep, oldest first.
    fn unroll(&self, g: &mut Graph, bind: &Binding, xs: &[NodeId]) -> Result<Vec<NodeId>, LayerError>;
}

/// Unrolls `layer` from a zero state and returns either all hidden states or just `h_T`.
pub fn run_sequence<L: Recurrent + ?Sized>(
    layer: &L,
    g: &mut Graph,
    bind: &Binding,
    xs: &[NodeId],
    mode: SeqMode,
) -> Result<Vec<NodeId>, LayerError> {
    if xs.is_empty() {
        return Err(LayerError::EmptySequence);
    }
    let mut hs = layer.unroll(g, bind, xs)?;
    if mode == SeqMode::Last {
        let last = hs.pop().expect("non-empty");
        hs = vec![last];
    }
    Ok(hs)
}

fn zero_state(g: &mut Graph, batch: usize, units: usize) -> Result<NodeId, LayerError> {
    Ok(g.input(Tensor::zeros(&[batch, units]))?)
}

fn check_input(g: &Graph, x: NodeId, inputs: usize) -> Result<usize, LayerError> {
    let (batch, width) = g.value(x).dims2();
    if width != inputs {
        return Err(LayerError::InputWidth {
            expected: inputs,
            got: width,
        });
    }
    Ok(batch)
}

/// `W_h·h + W_x·x + b` for one gate.
#[derive(Debug, Clone, Copy)]
struct GateParams {
    w_h: ParamId,
    w_x: ParamId,
    b: ParamId,
}

impl GateParams {
    fn register(
        store: &mut ParamStore,
        prefix: &str,
        gate: &str,
        inputs: usize,
        units: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, LayerError> {
        Ok(Self {
            w_h: store.insert(format!("{prefix}.w_h{gate}"), glorot_uniform(rng, units, units))?,
            w_x: store.insert(format!("{prefix}.w_x{gate}"), glorot_uniform(rng, units, inputs))?,
            b: store.insert(format!("{prefix}.b_{gate}"), zeros_bias(units))?,
        })
    }

    fn preact(&self, g: &mut Graph, bind: &Binding, x: NodeId, h: NodeId) -> Result<NodeId, LayerError> {
        let from_x = g.linear(x, bind.node(self.w_x), Some(bind.node(self.b)))?;
        let from_h = g.linear(h, bind.node(self.w_h), None)?;
        Ok(g.add(from_h, from_x)?)
    }
}

/// `h_t = tanh(W_h·h_{t−1} + W_x·x_t + b)`.
#[derive(Debug, Clone)]
pub struct RnnCell {
    inputs: usize,
    units: usize,
    gate: GateParams,
}

impl RnnCell {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        inputs: usize,
        units: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, LayerError> {
        Ok(Self {
            inputs,
            units,
            gate: GateParams::register(store, prefix, "", inputs, units, rng)?,
        })
    }

    pub fn param_count(inputs: usize, units: usize) -> usize {
        (inputs + units) * units + units
    }

    pub fn w_h(&self) -> ParamId {
        self.gate.w_h
    }

    pub fn w_x(&self) -> ParamId {
        self.gate.w_x
    }

    pub fn bias(&self) -> ParamId {
        self.gate.b
    }

    pub fn step(&self, g: &mut Graph, bind: &Binding, x: NodeId, h: NodeId) -> Result<NodeId, LayerError> {
        check_input(g, x, self.inputs)?;
        let pre = self.gate.preact(g, bind, x, h)?;
        Ok(g.tanh(pre)?)
    }

    /// One step on plain values.
    pub fn step_values(&self, store: &ParamStore, x: &[f64], h: &[f64]) -> Result<Vec<f64>, LayerError> {
        let mut g = Graph::new();
        let bind = g.bind(store)?;
        let xn = g.input(Tensor::row(x))?;
        let hn = g.input(Tensor::row(h))?;
        let out = self.step(&mut g, &bind, xn, hn)?;
        Ok(g.value(out).data().to_vec())
    }
}

impl Recurrent for RnnCell {
    fn units(&self) -> usize {
        self.units
    }

    fn unroll(&self, g: &mut Graph, bind: &Binding, xs: &[NodeId]) -> Result<Vec<NodeId>, LayerError> {
        let batch = check_input(g, xs[0], self.inputs)?;
        let mut h = zero_state(g, batch, self.units)?;
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            h = self.step(g, bind, x, h)?;
            out.push(h);
        }
        Ok(out)
    }
}

/// Hidden and cell state of an LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(units: usize) -> Self {
        Self {
            h: vec![0.0; units],
            c: vec![0.0; units],
        }
    }
}

/// Node handles for one LSTM step, gates included.
#[derive(Debug, Clone, Copy)]
pub struct LstmStepNodes {
    pub forget: NodeId,
    pub input: NodeId,
    pub output: NodeId,
    pub candidate: NodeId,
    pub c: NodeId,
    pub h: NodeId,
}

/// Values of one LSTM step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub candidate: Vec<f64>,
    pub state: LstmState,
}

/// LSTM with forget, input and output gates and a tanh candidate:
///
/// ```text
/// f = σ(W_hf·h + W_xf·x + b_f)     C̃ = tanh(W_hc·h + W_xc·x + b_c)
/// i = σ(W_hi·h + W_xi·x + b_i)     C  = f·C_prev + i·C̃
/// o = σ(W_ho·h + W_xo·x + b_o)     h  = o·tanh(C)
/// ```
#[derive(Debug, Clone)]
pub struct LstmCell {
    inputs: usize,
    units: usize,
    forget: GateParams,
    input: GateParams,
    output: GateParams,
    candidate: GateParams,
}

impl LstmCell {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        inputs: usize,
        units: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, LayerError> {
        Ok(Self {
            inputs,
            units,
            forget: GateParams::register(store, prefix, "f", inputs, units, rng)?,
            input: GateParams::register(store, prefix, "i", inputs, units, rng)?,
            output: GateParams::register(store, prefix, "o", inputs, units, rng)?,
            candidate: GateParams::register(store, prefix, "c", inputs, units, rng)?,
        })
    }

    /// `4·((inputs + units)·units + units)`.
    pub fn param_count(inputs: usize, units: usize) -> usize {
        4 * RnnCell::param_count(inputs, units)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn forget_bias(&self) -> ParamId {
        self.forget.b
    }

    pub fn input_bias(&self) -> ParamId {
        self.input.b
    }

    pub fn output_bias(&self) -> ParamId {
        self.output.b
    }

    pub fn candidate_bias(&self) -> ParamId {
        self.candidate.b
    }

    pub fn step(
        &self,
        g: &mut Graph,
        bind: &Binding,
        x: NodeId,
        h_prev: NodeId,
        c_prev: NodeId,
    ) -> Result<LstmStepNodes, LayerError> {
        check_input(g, x, self.inputs)?;
        let f_pre = self.forget.preact(g, bind, x, h_prev)?;
        let forget = g.sigmoid(f_pre)?;
        let i_pre = self.input.preact(g, bind, x, h_prev)?;
        let input = g.sigmoid(i_pre)?;
        let o_pre = self.output.preact(g, bind, x, h_prev)?;
        let output = g.sigmoid(o_pre)?;
        let c_pre = self.candidate.preact(g, bind, x, h_prev)?;
        let candidate = g.tanh(c_pre)?;

        let kept = g.mul(forget, c_prev)?;
        let written = g.mul(input, candidate)?;
        let c = g.add(kept, written)?;
        let squashed = g.tanh(c)?;
        let h = g.mul(output, squashed)?;
        Ok(LstmStepNodes {
            forget,
            input,
            output,
            candidate,
            c,
            h,
        })
    }

    pub fn step_values(
        &self,
        store: &ParamStore,
        x: &[f64],
        state: &LstmState,
    ) -> Result<LstmStep, LayerError> {
        let mut g = Graph::new();
        let bind = g.bind(store)?;
        let xn = g.input(Tensor::row(x))?;
        let hn = g.input(Tensor::row(&state.h))?;
        let cn = g.input(Tensor::row(&state.c))?;
        let s = self.step(&mut g, &bind, xn, hn, cn)?;
        let v = |id| g.value(id).data().to_vec();
        Ok(LstmStep {
            forget: v(s.forget),
            input: v(s.input),
            output: v(s.output),
            candidate: v(s.candidate),
            state: LstmState { h: v(s.h), c: v(s.c) },
        })
    }
}

impl Recurrent for LstmCell {
    fn units(&self) -> usize {
        self.units
    }

    fn unroll(&self, g: &mut Graph, bind: &Binding, xs: &[NodeId]) -> Result<Vec<NodeId>, LayerError> {
        let batch = check_input(g, xs[0], self.inputs)?;
        let mut h = zero_state(g, batch, self.units)?;
        let mut c = zero_state(g, batch, self.units)?;
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            let s = self.step(g, bind, x, h, c)?;
            h = s.h;
            c = s.c;
            out.push(h);
        }
        Ok(out)
    }
}

/// GRU with the reset gate applied to `h_prev` before the recurrent product:
///
/// ```text
/// z = σ(W_hz·h + W_xz·x + b_z)     h̃ = tanh(W_hh·(r⊙h) + W_xh·x + b_h)
/// r = σ(W_hr·h + W_xr·x + b_r)     h' = (1 − z)⊙h + z⊙h̃
/// ```
#[derive(Debug, Clone)]
pub struct GruCell {
    inputs: usize,
    units: usize,
    update: GateParams,
    reset: GateParams,
    candidate: GateParams,
}

impl GruCell {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        inputs: usize,
        units: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, LayerError> {
        Ok(Self {
            inputs,
            units,
            update: GateParams::register(store, prefix, "z", inputs, units, rng)?,
            reset: GateParams::register(store, prefix, "r", inputs, units, rng)?,
            candidate: GateParams::register(store, prefix, "h", inputs, units, rng)?,
        })
    }

    pub fn param_count(inputs: usize, units: usize) -> usize {
        3 * RnnCell::param_count(inputs, units)
    }

    pub fn step(&self, g: &mut Graph, bind: &Binding, x: NodeId, h: NodeId) -> Result<NodeId, LayerError> {
        check_input(g, x, self.inputs)?;
        let z_pre = self.update.preact(g, bind, x, h)?;
        let z = g.sigmoid(z_pre)?;
        let r_pre = self.reset.preact(g, bind, x, h)?;
        let r = g.sigmoid(r_pre)?;
        let reset_h = g.mul(r, h)?;
        let cand_pre = self.candidate.preact(g, bind, x, reset_h)?;
        let cand = g.tanh(cand_pre)?;
        let keep = g.one_minus(z)?;
        let kept = g.mul(keep, h)?;
        let written = g.mul(z, cand)?;
        Ok(g.add(kept, written)?)
    }

    pub fn step_values(&self, store: &ParamStore, x: &[f64], h: &[f64]) -> Result<Vec<f64>, LayerError> {
        let mut g = Graph::new();
        let bind = g.bind(store)?;
        let xn = g.input(Tensor::row(x))?;
        let hn = g.input(Tensor::row(h))?;
        let out = self.step(&mut g, &bind, xn, hn)?;
        Ok(g.value(out).data().to_vec())
    }
}

impl Recurrent for GruCell {
    fn units(&self) -> usize {
        self.units
    }

    fn unroll(&self, g: &mut Graph, bind: &Binding, xs: &[NodeId]) -> Result<Vec<NodeId>, LayerError> {
        let batch = check_input(g, xs[0], self.inputs)?;
        let mut h = zero_state(g, batch, self.units)?;
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            h = self.step(g, bind, x, h)?;
            out.push(h);
        }
        Ok(out)
    }
}

/// Two LSTMs, one reading the sequence forward and one backward. Output at step `t` is
/// `[h_fwd(t), h_bwd(t)]`, forward half first.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl BiLstm {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        inputs: usize,
        units: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, LayerError> {
        Ok(Self {
            forward: LstmCell::register(store, &format!("{prefix}.fwd"), inputs, units, rng)?,
            backward: LstmCell::register(store, &format!("{prefix}.bwd"), inputs, units, rng)?,
        })
    }

    pub fn param_count(inputs: usize, units: usize) -> usize {
        2 * LstmCell::param_count(inputs, units)
    }
}

impl Recurrent for BiLstm {
    fn units(&self) -> usize {
        2 * self.forward.units
    }

    fn unroll(&self, g: &mut Graph, bind: &Binding, xs: &[NodeId]) -> Result<Vec<NodeId>, LayerError> {
        let fwd = self.forward.unroll(g, bind, xs)?;
        let reversed: Vec<NodeId> = xs.iter().rev().copied().collect();
        let mut bwd = self.backward.unroll(g, bind, &reversed)?;
        bwd.reverse();
        fwd.iter()
            .zip(&bwd)
            .map(|(&f, &b)| Ok(g.concat_cols(&[f, b])?))
            .collect()
    }
}
