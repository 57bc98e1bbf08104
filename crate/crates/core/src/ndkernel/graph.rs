//! Define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] records every operation as it executes. Values are 2-D (`rows × cols`, batch on
//! the rows). [`Graph::backward`] walks the record in reverse and accumulates adjoints in a
//! fixed order, so two runs over the same inputs produce bit-identical gradients.

use super::tensor::{dot, matmul_into, relu, sigmoid};
use super::{KernelError, ParamId, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Linear {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    OneMinus(NodeId),
    Scale(NodeId, f64),
    MulConst(NodeId, Tensor),
    MulColumn {
        col: NodeId,
        x: NodeId,
    },
    ConcatCols(Vec<NodeId>),
    SliceCols {
        x: NodeId,
        start: usize,
    },
    ConcatRows(Vec<NodeId>),
    SliceRows {
        x: NodeId,
        start: usize,
    },
    SoftmaxRows(NodeId),
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Tensor,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    Mean(NodeId),
    Sum(NodeId),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Per-channel statistics of a training-mode batch-norm call, used to update running averages.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Graph nodes bound to every entry of a [`ParamStore`], indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Binding {
    nodes: Vec<NodeId>,
}

impl Binding {
    pub fn node(&self, id: ParamId) -> NodeId {
        self.nodes[id.0]
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> KernelError {
    KernelError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn mat(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
    Tensor::new(vec![rows, cols], data).expect("shape computed from data")
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<NodeId, KernelError> {
        if !value.is_finite() {
            return Err(KernelError::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Constant input. Vectors of shape `[n]` become `1 × n` rows.
    pub fn input(&mut self, value: Tensor) -> Result<NodeId, KernelError> {
        let (r, c) = value.dims2();
        let value = value.reshape(&[r, c])?;
        self.push("input", value, Op::Input)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<NodeId, KernelError> {
        let value = store.get(id).clone();
        let (r, c) = value.dims2();
        let value = value.reshape(&[r, c])?;
        self.push("param", value, Op::Param(id))
    }

    /// Creates one leaf per store entry.
    pub fn bind(&mut self, store: &ParamStore) -> Result<Binding, KernelError> {
        let nodes = (0..store.len())
            .map(|i| self.param(store, ParamId(i)))
            .collect::<Result<_, _>>()?;
        Ok(Binding { nodes })
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, Op::MatMul(a, b))
    }

    /// `x · wᵀ + b` with `x: [B×in]`, `w: [out×in]`, `b: [out]`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId, KernelError> {
        let (xv, wv) = (self.value(x), self.value(w));
        let (batch, fan_in) = xv.dims2();
        let (fan_out, w_in) = wv.dims2();
        if fan_in != w_in {
            return Err(mismatch("linear", xv, wv));
        }
        let bias = match b {
            Some(b) => {
                let bv = self.value(b);
                if bv.len() != fan_out {
                    return Err(mismatch("linear_bias", wv, bv));
                }
                Some(bv.data())
            }
            None => None,
        };
        let mut out = vec![0.0; batch * fan_out];
        for r in 0..batch {
            let xr = xv.row_slice(r);
            for o in 0..fan_out {
                let mut acc = dot(xr, wv.row_slice(o));
                if let Some(bias) = bias {
                    acc += bias[o];
                }
                out[r * fan_out + o] = acc;
            }
        }
        self.push("linear", mat(batch, fan_out, out), Op::Linear { x, w, b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        let value = self.value(a).add(self.value(b))?;
        self.push("add", value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        let value = self.value(a).sub(self.value(b))?;
        self.push("sub", value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        let value = self.value(a).hadamard(self.value(b))?;
        self.push("mul", value, Op::Mul(a, b))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, KernelError> {
        let value = self.value(a).map(sigmoid);
        self.push("sigmoid", value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, KernelError> {
        let value = self.value(a).map(f64::tanh);
        self.push("tanh", value, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, KernelError> {
        let value = self.value(a).map(relu);
        self.push("relu", value, Op::Relu(a))
    }

    /// `1 − a`.
    pub fn one_minus(&mut self, a: NodeId) -> Result<NodeId, KernelError> {
        let value = self.value(a).map(|v| 1.0 - v);
        self.push("one_minus", value, Op::OneMinus(a))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, KernelError> {
        let value = self.value(a).scale(c);
        self.push("scale", value, Op::Scale(a, c))
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mul_const(&mut self, a: NodeId, mask: Tensor) -> Result<NodeId, KernelError> {
        let av = self.value(a);
        if av.len() != mask.len() {
            return Err(mismatch("mul_const", av, &mask));
        }
        let mask = mask.reshape(&[av.rows(), av.cols()])?;
        let value = av.hadamard(&mask)?;
        self.push("mul_const", value, Op::MulConst(a, mask))
    }

    /// Scales row `r` of `x: [B×m]` by `col[r]` where `col: [B×1]`.
    pub fn mul_column(&mut self, col: NodeId, x: NodeId) -> Result<NodeId, KernelError> {
        let (cv, xv) = (self.value(col), self.value(x));
        let (batch, width) = xv.dims2();
        if cv.dims2() != (batch, 1) {
            return Err(mismatch("mul_column", cv, xv));
        }
        let mut out = Vec::with_capacity(batch * width);
        for r in 0..batch {
            let s = cv.data()[r];
            out.extend(xv.row_slice(r).iter().map(|v| v * s));
        }
        self.push("mul_column", mat(batch, width, out), Op::MulColumn { col, x })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, KernelError> {
        let first = parts.first().ok_or(KernelError::EmptyInput("concat_cols"))?;
        let batch = self.value(*first).rows();
        let mut width = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.rows() != batch {
                return Err(mismatch("concat_cols", self.value(*first), pv));
            }
            width += pv.cols();
        }
        let mut out = Vec::with_capacity(batch * width);
        for r in 0..batch {
            for &p in parts {
                out.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        self.push("concat_cols", mat(batch, width, out), Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId, KernelError> {
        let xv = self.value(x);
        let (batch, width) = xv.dims2();
        if start + len > width || len == 0 {
            return Err(KernelError::OutOfRange {
                op: "slice_cols",
                start,
                len,
                size: width,
            });
        }
        let mut out = Vec::with_capacity(batch * len);
        for r in 0..batch {
            out.extend_from_slice(&xv.row_slice(r)[start..start + len]);
        }
        self.push("slice_cols", mat(batch, len, out), Op::SliceCols { x, start })
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, KernelError> {
        let first = parts.first().ok_or(KernelError::EmptyInput("concat_rows"))?;
        let width = self.value(*first).cols();
        let mut out = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.cols() != width {
                return Err(mismatch("concat_rows", self.value(*first), pv));
            }
            rows += pv.rows();
            out.extend_from_slice(pv.data());
        }
        self.push("concat_rows", mat(rows, width, out), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId, KernelError> {
        let xv = self.value(x);
        let (rows, width) = xv.dims2();
        if start + len > rows || len == 0 {
            return Err(KernelError::OutOfRange {
                op: "slice_rows",
                start,
                len,
                size: rows,
            });
        }
        let out = xv.data()[start * width..(start + len) * width].to_vec();
        self.push("slice_rows", mat(len, width, out), Op::SliceRows { x, start })
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, x: NodeId) -> Result<NodeId, KernelError> {
        let xv = self.value(x);
        let (rows, width) = xv.dims2();
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            let row = xv.row_slice(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            out.extend(exps.iter().map(|e| e / total));
        }
        self.push("softmax_rows", mat(rows, width, out), Op::SoftmaxRows(x))
    }

    /// Per-column batch normalization of `x: [N×C]`.
    ///
    /// With `running = None` the batch statistics are used (training) and returned; otherwise the
    /// supplied `(mean, var)` are treated as constants.
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
        running: Option<(&[f64], &[f64])>,
    ) -> Result<(NodeId, Option<BatchStats>), KernelError> {
        let xv = self.value(x);
        let (n, channels) = xv.dims2();
        let (gv, bv) = (self.value(gamma), self.value(beta));
        if gv.len() != channels || bv.len() != channels {
            return Err(mismatch("batch_norm", xv, gv));
        }
        let (mean, var, batch_stats) = match running {
            Some((m, v)) => {
                if m.len() != channels || v.len() != channels {
                    return Err(mismatch("batch_norm_running", xv, gv));
                }
                (m.to_vec(), v.to_vec(), false)
            }
            None => {
                if n < 2 {
                    return Err(KernelError::BatchTooSmall(n));
                }
                let mut mean = vec![0.0; channels];
                for r in 0..n {
                    for (m, v) in mean.iter_mut().zip(xv.row_slice(r)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                let mut var = vec![0.0; channels];
                for r in 0..n {
                    for ((s, v), m) in var.iter_mut().zip(xv.row_slice(r)).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= n as f64);
                (mean, var, true)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = Vec::with_capacity(n * channels);
        let mut out = Vec::with_capacity(n * channels);
        for r in 0..n {
            for (c, v) in xv.row_slice(r).iter().enumerate() {
                let h = (v - mean[c]) * inv_std[c];
                xhat.push(h);
                out.push(gv.data()[c] * h + bv.data()[c]);
            }
        }
        let stats = batch_stats.then(|| BatchStats { mean, var });
        let id = self.push(
            "batch_norm",
            mat(n, channels, out),
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat: mat(n, channels, xhat),
                inv_std,
                batch_stats,
            },
        )?;
        Ok((id, stats))
    }

    /// Mean of every element, as a `1 × 1` scalar.
    pub fn mean(&mut self, a: NodeId) -> Result<NodeId, KernelError> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(KernelError::EmptyInput("mean"));
        }
        let value = Tensor::scalar(av.sum() / av.len() as f64);
        self.push("mean", value, Op::Mean(a))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId, KernelError> {
        let value = Tensor::scalar(self.value(a).sum());
        self.push("sum", value, Op::Sum(a))
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, KernelError> {
        if loss.0 >= self.nodes.len() {
            return Err(KernelError::UnrecordedTape);
        }
        if self.value(loss).len() != 1 {
            return Err(KernelError::NonScalarLoss(self.value(loss).shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Input | Op::Param(_) => {
                    // Leaves keep their adjoint for collection below.
                    grads[idx] = Some(dy);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k) = av.dims2();
                    let n = bv.cols();
                    let mut da = vec![0.0; m * k];
                    matmul_into(dy.data(), bv.transpose().data(), &mut da, m, n, k);
                    let mut db = vec![0.0; k * n];
                    matmul_into(av.transpose().data(), dy.data(), &mut db, k, m, n);
                    accumulate(&mut grads, *a, mat(m, k, da));
                    accumulate(&mut grads, *b, mat(k, n, db));
                }
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (batch, fan_in) = xv.dims2();
                    let fan_out = wv.rows();
                    let mut dx = vec![0.0; batch * fan_in];
                    matmul_into(dy.data(), wv.data(), &mut dx, batch, fan_out, fan_in);
                    let mut dw = vec![0.0; fan_out * fan_in];
                    for r in 0..batch {
                        let xr = xv.row_slice(r);
                        let dyr = dy.row_slice(r);
                        for (o, &g) in dyr.iter().enumerate() {
                            if g == 0.0 {
                                continue;
                            }
                            let row = &mut dw[o * fan_in..(o + 1) * fan_in];
                            for (d, xv) in row.iter_mut().zip(xr) {
                                *d += g * xv;
                            }
                        }
                    }
                    if let Some(b) = b {
                        let mut db = vec![0.0; fan_out];
                        for r in 0..batch {
                            for (d, g) in db.iter_mut().zip(dy.row_slice(r)) {
                                *d += g;
                            }
                        }
                        accumulate(&mut grads, *b, mat(1, fan_out, db));
                    }
                    accumulate(&mut grads, *x, mat(batch, fan_in, dx));
                    accumulate(&mut grads, *w, mat(fan_out, fan_in, dw));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, dy.clone());
                    accumulate(&mut grads, *b, dy);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, dy.scale(-1.0));
                    accumulate(&mut grads, *a, dy);
                }
                Op::Mul(a, b) => {
                    let da = dy.hadamard(self.value(*b))?;
                    let db = dy.hadamard(self.value(*a))?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Sigmoid(a) => {
                    let d = zip_map(&dy, y, |g, s| g * s * (1.0 - s));
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = zip_map(&dy, y, |g, t| g * (1.0 - t * t));
                    accumulate(&mut grads, *a, d);
                }
                Op::Relu(a) => {
                    let d = zip_map(&dy, self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads, *a, d);
                }
                Op::OneMinus(a) => accumulate(&mut grads, *a, dy.scale(-1.0)),
                Op::Scale(a, c) => accumulate(&mut grads, *a, dy.scale(*c)),
                Op::MulConst(a, mask) => accumulate(&mut grads, *a, dy.hadamard(mask)?),
                Op::MulColumn { col, x } => {
                    let (cv, xv) = (self.value(*col), self.value(*x));
                    let (batch, width) = xv.dims2();
                    let mut dcol = vec![0.0; batch];
                    let mut dx = Vec::with_capacity(batch * width);
                    for r in 0..batch {
                        let s = cv.data()[r];
                        dcol[r] = dot(dy.row_slice(r), xv.row_slice(r));
                        dx.extend(dy.row_slice(r).iter().map(|g| g * s));
                    }
                    accumulate(&mut grads, *col, mat(batch, 1, dcol));
                    accumulate(&mut grads, *x, mat(batch, width, dx));
                }
                Op::ConcatCols(parts) => {
                    let batch = dy.rows();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut dp = Vec::with_capacity(batch * w);
                        for r in 0..batch {
                            dp.extend_from_slice(&dy.row_slice(r)[offset..offset + w]);
                        }
                        accumulate(&mut grads, p, mat(batch, w, dp));
                        offset += w;
                    }
                }
                Op::SliceCols { x, start } => {
                    let (batch, width) = self.value(*x).dims2();
                    let len = dy.cols();
                    let mut dx = vec![0.0; batch * width];
                    for r in 0..batch {
                        dx[r * width + start..r * width + start + len]
                            .copy_from_slice(dy.row_slice(r));
                    }
                    accumulate(&mut grads, *x, mat(batch, width, dx));
                }
                Op::ConcatRows(parts) => {
                    let width = dy.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        let dp = dy.data()[offset * width..(offset + rows) * width].to_vec();
                        accumulate(&mut grads, p, mat(rows, width, dp));
                        offset += rows;
                    }
                }
                Op::SliceRows { x, start } => {
                    let (rows, width) = self.value(*x).dims2();
                    let mut dx = vec![0.0; rows * width];
                    dx[start * width..start * width + dy.len()].copy_from_slice(dy.data());
                    accumulate(&mut grads, *x, mat(rows, width, dx));
                }
                Op::SoftmaxRows(x) => {
                    let (rows, width) = y.dims2();
                    let mut dx = Vec::with_capacity(rows * width);
                    for r in 0..rows {
                        let (yr, gr) = (y.row_slice(r), dy.row_slice(r));
                        let inner = dot(yr, gr);
                        dx.extend(yr.iter().zip(gr).map(|(s, g)| s * (g - inner)));
                    }
                    accumulate(&mut grads, *x, mat(rows, width, dx));
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                    batch_stats,
                } => {
                    let (n, channels) = xhat.dims2();
                    let gv = self.value(*gamma).data();
                    let mut dgamma = vec![0.0; channels];
                    let mut dbeta = vec![0.0; channels];
                    for r in 0..n {
                        for c in 0..channels {
                            let g = dy.get(r, c);
                            dgamma[c] += g * xhat.get(r, c);
                            dbeta[c] += g;
                        }
                    }
                    let mut dx = vec![0.0; n * channels];
                    if *batch_stats {
                        // dx = inv_std/N · (N·dxhat − Σdxhat − xhat·Σ(dxhat·xhat)), dxhat = γ·dy
                        let nf = n as f64;
                        for c in 0..channels {
                            let sum_dxhat = dbeta[c] * gv[c];
                            let sum_dxhat_xhat = dgamma[c] * gv[c];
                            for r in 0..n {
                                let dxhat = dy.get(r, c) * gv[c];
                                dx[r * channels + c] = inv_std[c] / nf
                                    * (nf * dxhat - sum_dxhat - xhat.get(r, c) * sum_dxhat_xhat);
                            }
                        }
                    } else {
                        for r in 0..n {
                            for c in 0..channels {
                                dx[r * channels + c] = dy.get(r, c) * gv[c] * inv_std[c];
                            }
                        }
                    }
                    accumulate(&mut grads, *x, mat(n, channels, dx));
                    accumulate(&mut grads, *gamma, mat(1, channels, dgamma));
                    accumulate(&mut grads, *beta, mat(1, channels, dbeta));
                }
                Op::Mean(a) => {
                    let av = self.value(*a);
                    let g = dy.data()[0] / av.len() as f64;
                    accumulate(&mut grads, *a, Tensor::filled(av.shape(), g));
                }
                Op::Sum(a) => {
                    let av = self.value(*a);
                    accumulate(&mut grads, *a, Tensor::filled(av.shape(), dy.data()[0]));
                }
            }
        }

        let mut by_param = Vec::new();
        for (idx, node) in self.nodes.iter().enumerate().take(loss.0 + 1) {
            if let Op::Param(pid) = node.op {
                by_param.push((pid, idx));
            }
        }
        Ok(Gradients {
            leaves: grads,
            by_param,
        })
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Adjoints of the leaves reached by a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
    by_param: Vec<(ParamId, usize)>,
}

impl Gradients {
    /// Gradient with respect to a leaf node. `None` when the loss does not depend on it.
    pub fn wrt(&self, node: NodeId) -> Option<&Tensor> {
        self.leaves.get(node.0).and_then(Option::as_ref)
    }

    /// Gradients in [`ParamStore`] order, each shaped like its parameter. Unreached parameters
    /// get zeros; a parameter bound more than once sums its contributions.
    pub fn for_store(&self, store: &ParamStore) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = store
            .iter()
            .map(|p| Tensor::zeros(p.value.shape()))
            .collect();
        for &(pid, idx) in &self.by_param {
            if let Some(g) = &self.leaves[idx] {
                out[pid.0].add_assign(g);
            }
        }
        out
    }
}
