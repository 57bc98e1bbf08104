//! Central-difference checks shared by the gradient tests and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hrseq::layers::{
    flatten, run_sequence, Activation, AdditiveAttention, BatchNorm, BiLstm, Dense, GruCell,
    LayerError, LstmCell, Recurrent, RnnCell, SeqMode,
};
use hrseq::models::{Model, ModelError, ModelSpec};
use hrseq::ndkernel::{
    finite_diff_check, Binding, GradCheck, Graph, KernelError, NodeId, ParamId, ParamStore, Tensor,
    DEFAULT_EPS,
};

pub const TOL: f64 = 1e-4;
pub const SEEDS: [u64; 3] = [1, 2, 3];
pub const LAYERS: [&str; 8] = ["rnn", "lstm", "gru", "bilstm", "attention", "dense", "td_dense", "batchnorm"];
pub const STEPS: usize = 5;
const BATCH: usize = 3;

fn kernel(e: LayerError) -> KernelError {
    match e {
        LayerError::Kernel(k) => k,
        other => panic!("layer error in gradient check: {other}"),
    }
}

fn model_kernel(e: ModelError) -> KernelError {
    match e {
        ModelError::Layer(l) => kernel(l),
        ModelError::Kernel(k) => k,
        other => panic!("model error in gradient check: {other}"),
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

fn randomize(store: &mut ParamStore, name: &str, rng: &mut ChaCha8Rng, lo: f64, hi: f64) {
    let id = store.find(name).unwrap_or_else(|| panic!("no parameter {name}"));
    for v in store.values_mut(id) {
        *v = rng.gen_range(lo..hi);
    }
}

/// Registers `STEPS` trainable `[BATCH × width]` inputs so their gradients are checked too.
fn inputs(store: &mut ParamStore, rng: &mut ChaCha8Rng, width: usize) -> Vec<ParamId> {
    (0..STEPS)
        .map(|t| store.insert(format!("x{t}"), random_tensor(rng, BATCH, width)).unwrap())
        .collect()
}

fn nodes(b: &Binding, ids: &[ParamId]) -> Vec<NodeId> {
    ids.iter().map(|&x| b.node(x)).collect()
}

/// Scalar probe `Σ r ⊙ y` with fixed random weights `r`, so no gradient cancels by symmetry.
fn probe(g: &mut Graph, y: NodeId, weights: &Tensor) -> Result<NodeId, KernelError> {
    let weighted = g.mul_const(y, weights.clone())?;
    g.sum(weighted)
}

fn probe_seq(g: &mut Graph, ys: &[NodeId], weights: &[Tensor]) -> Result<NodeId, KernelError> {
    let mut total: Option<NodeId> = None;
    for (y, w) in ys.iter().zip(weights) {
        let s = probe(g, *y, w)?;
        total = Some(match total {
            Some(t) => g.add(t, s)?,
            None => s,
        });
    }
    Ok(total.expect("non-empty"))
}

fn worse(a: GradCheck, b: GradCheck) -> GradCheck {
    let coordinates = a.coordinates + b.coordinates;
    let mut out = if b.max_rel_error > a.max_rel_error { b } else { a };
    out.coordinates = coordinates;
    out
}

fn recurrent<L: Recurrent>(
    seed: u64,
    register: impl Fn(&mut ParamStore, &mut ChaCha8Rng) -> L,
    n: usize,
    out_width: usize,
) -> GradCheck {
    [SeqMode::AllSteps, SeqMode::Last]
        .into_iter()
        .map(|mode| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut store = ParamStore::new();
            let layer = register(&mut store, &mut rng);
            let xs = inputs(&mut store, &mut rng, n);
            let weights: Vec<Tensor> = (0..STEPS).map(|_| random_tensor(&mut rng, BATCH, out_width)).collect();
            finite_diff_check(&store, DEFAULT_EPS, |g, b| {
                let hs = run_sequence(&layer, g, b, &nodes(b, &xs), mode).map_err(kernel)?;
                probe_seq(g, &hs, &weights)
            })
            .unwrap()
        })
        .reduce(worse)
        .unwrap()
}

fn attention(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let att = AdditiveAttention::register(&mut store, "att", 6, &mut rng).unwrap();
    // Nonzero bias so every parameter has a generic gradient.
    randomize(&mut store, "att.b", &mut rng, -0.5, 0.5);
    let xs = inputs(&mut store, &mut rng, 6);
    let w_ctx = random_tensor(&mut rng, BATCH, 6);
    let w_seq: Vec<Tensor> = (0..STEPS).map(|_| random_tensor(&mut rng, BATCH, 6)).collect();
    let w_alpha = random_tensor(&mut rng, BATCH, STEPS);
    finite_diff_check(&store, DEFAULT_EPS, |g, b| {
        let out = att.apply(g, b, &nodes(b, &xs)).map_err(kernel)?;
        let a = probe(g, out.context, &w_ctx)?;
        let s = probe_seq(g, &out.reweighted, &w_seq)?;
        let w = probe(g, out.weights, &w_alpha)?;
        let t = g.add(a, s)?;
        g.add(t, w)
    })
    .unwrap()
}

fn dense(seed: u64) -> GradCheck {
    [Activation::Linear, Activation::Tanh, Activation::Sigmoid, Activation::Relu]
        .into_iter()
        .map(|act| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut store = ParamStore::new();
            let layer = Dense::register(&mut store, "fc", 8, 5, act, &mut rng).unwrap();
            randomize(&mut store, "fc.b", &mut rng, -0.5, 0.5);
            let x = store.insert("x", random_tensor(&mut rng, BATCH, 8)).unwrap();
            let w = random_tensor(&mut rng, BATCH, 5);
            finite_diff_check(&store, DEFAULT_EPS, |g, b| {
                let y = layer.apply(g, b, b.node(x)).map_err(kernel)?;
                probe(g, y, &w)
            })
            .unwrap()
        })
        .reduce(worse)
        .unwrap()
}

fn td_dense(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let layer = Dense::register(&mut store, "td", 4, 3, Activation::Linear, &mut rng).unwrap();
    let xs = inputs(&mut store, &mut rng, 4);
    let w = random_tensor(&mut rng, BATCH, 3 * STEPS);
    finite_diff_check(&store, DEFAULT_EPS, |g, b| {
        let ys = layer.apply_seq(g, b, &nodes(b, &xs)).map_err(kernel)?;
        let flat = flatten(g, &ys).map_err(kernel)?;
        probe(g, flat, &w)
    })
    .unwrap()
}

/// Training mode over a flat batch and over pooled timesteps.
fn batchnorm(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let bn = BatchNorm::register(&mut store, "bn", 5).unwrap();
    for v in store.values_mut(bn.gamma()) {
        *v = rng.gen_range(0.5..1.5);
    }
    randomize(&mut store, "bn.beta", &mut rng, -0.5, 0.5);
    let x = store.insert("x", random_tensor(&mut rng, 6, 5)).unwrap();
    let w = random_tensor(&mut rng, 6, 5);
    let frozen = store.clone();
    let flat = finite_diff_check(&store, DEFAULT_EPS, |g, b| {
        let (y, stats) = bn.apply(g, b, &frozen, b.node(x), true).map_err(kernel)?;
        assert!(stats.is_some());
        probe(g, y, &w)
    })
    .unwrap();

    let mut store = ParamStore::new();
    let bn = BatchNorm::register(&mut store, "bn", 4).unwrap();
    let xs = inputs(&mut store, &mut rng, 4);
    let weights: Vec<Tensor> = (0..STEPS).map(|_| random_tensor(&mut rng, BATCH, 4)).collect();
    let frozen = store.clone();
    let seq = finite_diff_check(&store, DEFAULT_EPS, |g, b| {
        let (ys, _) = bn.apply_seq(g, b, &frozen, &nodes(b, &xs), true).map_err(kernel)?;
        probe_seq(g, &ys, &weights)
    })
    .unwrap();
    worse(flat, seq)
}

/// Worst relative error for one layer kind at one seeded parameter draw.
pub fn layer_check(layer: &str, seed: u64) -> GradCheck {
    match layer {
        "rnn" => recurrent(seed, |s, r| RnnCell::register(s, "rnn", 4, 6, r).unwrap(), 4, 6),
        "lstm" => recurrent(seed, |s, r| LstmCell::register(s, "lstm", 4, 6, r).unwrap(), 4, 6),
        "gru" => recurrent(seed, |s, r| GruCell::register(s, "gru", 3, 5, r).unwrap(), 3, 5),
        "bilstm" => recurrent(seed, |s, r| BiLstm::register(s, "bilstm", 3, 4, r).unwrap(), 3, 8),
        "attention" => attention(seed),
        "dense" => dense(seed),
        "td_dense" => td_dense(seed),
        "batchnorm" => batchnorm(seed),
        other => panic!("unknown layer {other}"),
    }
}

/// End-to-end squared loss through a composed network with `features`-wide inputs, dropout off.
pub fn model_check(spec: &ModelSpec, seed: u64) -> GradCheck {
    let mut model = Model::build(spec, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let head = format!("l{}.dense.b", spec.layers.len() - 1);
    let id = model.params().find(&head).unwrap();
    // Keep the ReLU head active so the check is away from its kink.
    model.params_mut().values_mut(id)[0] = 2.0;
    let mut store = model.params().clone();
    let xs = inputs(&mut store, &mut rng, spec.features);
    let target = random_tensor(&mut rng, BATCH, 1);
    finite_diff_check(&store, DEFAULT_EPS, |g, b| {
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        let fwd = model
            .forward_nodes(g, b, nodes(b, &xs), true, &mut unused)
            .map_err(model_kernel)?;
        let t = g.input(target.clone())?;
        let d = g.sub(fwd.output, t)?;
        let sq = g.mul(d, d)?;
        g.mean(sq)
    })
    .unwrap()
}
