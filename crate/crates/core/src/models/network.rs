use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{ModelSpec, Shape};
use super::ModelError;
use crate::ingest::WindowSample;
use crate::layers::{
    dropout, flatten, run_sequence, AdditiveAttention, AttentionOutput, BatchNorm, BiLstm, Dense,
    GruCell, LayerSpec, LstmCell, RnnCell, SeqMode,
};
use crate::ndkernel::{BatchStats, Binding, Graph, NodeId, ParamStore, Tensor};

/// Inputs with any feature beyond this magnitude are assumed to be unnormalized.
const MAX_NORMALIZED_MAGNITUDE: f64 = 1e3;

/// Rows per forward pass when predicting.
const PREDICT_BATCH: usize = 256;

#[derive(Debug, Clone)]
enum Built {
    Rnn(RnnCell, SeqMode),
    Lstm(LstmCell, SeqMode),
    Gru(GruCell, SeqMode),
    BiLstm(BiLstm, SeqMode),
    Attention(AdditiveAttention, AttentionOutput),
    Dense(Dense),
    TdDense(Dense),
    Flatten,
    Dropout(f64),
    BatchNorm(BatchNorm),
    Relu,
}

enum Act {
    Seq(Vec<NodeId>),
    Flat(NodeId),
}

/// Output of one forward pass.
pub struct Forward {
    /// `[B × 1]` predictions.
    pub output: NodeId,
    /// Batch statistics of every batch-norm layer, by layer index (training mode only).
    pub bn_stats: Vec<(usize, BatchStats)>,
}

/// An instantiated [`ModelSpec`] with its parameters.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    store: ParamStore,
    layers: Vec<Built>,
    training: bool,
}

fn mode(return_sequences: bool) -> SeqMode {
    if return_sequences {
        SeqMode::AllSteps
    } else {
        SeqMode::Last
    }
}

impl Model {
    /// Builds `spec` with Glorot-uniform weights drawn from `seed` and zero biases.
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build_with(spec, &mut rng)
    }

    pub fn build_with(spec: &ModelSpec, rng: &mut impl Rng) -> Result<Self, ModelError> {
        let shapes = spec.shapes()?;
        let mut store = ParamStore::new();
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut input = Shape::Seq {
            steps: spec.steps,
            width: spec.features,
        };
        for (idx, layer) in spec.layers.iter().enumerate() {
            let n = input.width();
            let prefix = format!("l{idx}.{}", layer.kind());
            let s = &mut store;
            let built = match layer {
                LayerSpec::Rnn { units, return_sequences } => {
                    Built::Rnn(RnnCell::register(s, &prefix, n, *units, rng)?, mode(*return_sequences))
                }
                LayerSpec::Lstm { units, return_sequences } => {
                    Built::Lstm(LstmCell::register(s, &prefix, n, *units, rng)?, mode(*return_sequences))
                }
                LayerSpec::Gru { units, return_sequences } => {
                    Built::Gru(GruCell::register(s, &prefix, n, *units, rng)?, mode(*return_sequences))
                }
                LayerSpec::Bilstm { units, return_sequences } => {
                    Built::BiLstm(BiLstm::register(s, &prefix, n, *units, rng)?, mode(*return_sequences))
                }
                LayerSpec::Attention { output } => {
                    Built::Attention(AdditiveAttention::register(s, &prefix, n, rng)?, *output)
                }
                LayerSpec::Dense { units, activation } => {
                    Built::Dense(Dense::register(s, &prefix, n, *units, *activation, rng)?)
                }
                LayerSpec::TdDense { units, activation } => {
                    Built::TdDense(Dense::register(s, &prefix, n, *units, *activation, rng)?)
                }
                LayerSpec::Flatten => Built::Flatten,
                LayerSpec::Dropout { rate } => Built::Dropout(*rate),
                LayerSpec::Batchnorm => Built::BatchNorm(BatchNorm::register(s, &prefix, n)?),
                LayerSpec::Relu => Built::Relu,
            };
            layers.push(built);
            input = shapes[idx];
        }
        Ok(Self {
            spec: spec.clone(),
            store,
            layers,
            training: false,
        })
    }

    /// Rebuilds a model around stored parameters. Names and shapes must match `spec` exactly.
    pub fn from_parts(spec: &ModelSpec, store: ParamStore) -> Result<Self, ModelError> {
        let mut model = Self::build(spec, 0)?;
        if model.store.len() != store.len() {
            return Err(ModelError::ParamLayout(format!(
                "expected {} tensors, got {}",
                model.store.len(),
                store.len()
            )));
        }
        for (want, got) in model.store.iter().zip(store.iter()) {
            if want.name != got.name || want.value.shape() != got.value.shape() || want.trainable != got.trainable {
                return Err(ModelError::ParamLayout(format!(
                    "parameter {:?} {:?} does not match {:?} {:?}",
                    got.name,
                    got.value.shape(),
                    want.name,
                    want.value.shape()
                )));
            }
        }
        model.store = store;
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Total scalar parameters, batch-norm running statistics included.
    pub fn count_params(&self) -> usize {
        self.store.count()
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn set_training(&mut self, training: bool) {
        self.training = training;
    }

    /// Records a forward pass over `samples` on `g`. Dropout and batch-norm follow `training`.
    pub fn forward(
        &self,
        g: &mut Graph,
        bind: &Binding,
        samples: &[&WindowSample],
        training: bool,
        rng: &mut impl Rng,
    ) -> Result<Forward, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let steps = self.spec.steps;
        let features = self.spec.features;
        let batch = samples.len();
        let mut xs = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut data = Vec::with_capacity(batch * features);
            for s in samples {
                data.extend_from_slice(&s.x[t]);
            }
            xs.push(g.input(Tensor::new(vec![batch, features], data)?)?);
        }
        self.forward_nodes(g, bind, xs, training, rng)
    }

    /// Forward pass from already-recorded per-timestep `[B × features]` input nodes.
    pub fn forward_nodes(
        &self,
        g: &mut Graph,
        bind: &Binding,
        xs: Vec<NodeId>,
        training: bool,
        rng: &mut impl Rng,
    ) -> Result<Forward, ModelError> {
        let mut act = Act::Seq(xs);
        let mut bn_stats = Vec::new();
        for (idx, layer) in self.layers.iter().enumerate() {
            act = match (layer, act) {
                (Built::Rnn(cell, m), Act::Seq(xs)) => seq_or_flat(run_sequence(cell, g, bind, &xs, *m)?, *m),
                (Built::Lstm(cell, m), Act::Seq(xs)) => seq_or_flat(run_sequence(cell, g, bind, &xs, *m)?, *m),
                (Built::Gru(cell, m), Act::Seq(xs)) => seq_or_flat(run_sequence(cell, g, bind, &xs, *m)?, *m),
                (Built::BiLstm(cell, m), Act::Seq(xs)) => {
                    seq_or_flat(run_sequence(cell, g, bind, &xs, *m)?, *m)
                }
                (Built::Attention(att, output), Act::Seq(hs)) => {
                    let nodes = att.apply(g, bind, &hs)?;
                    match output {
                        AttentionOutput::Context => Act::Flat(nodes.context),
                        AttentionOutput::Reweighted => Act::Seq(nodes.reweighted),
                    }
                }
                (Built::Dense(d), Act::Flat(x)) => Act::Flat(d.apply(g, bind, x)?),
                (Built::TdDense(d), Act::Seq(xs)) => Act::Seq(d.apply_seq(g, bind, &xs)?),
                (Built::Flatten, Act::Seq(xs)) => Act::Flat(flatten(g, &xs)?),
                (Built::Flatten, flat @ Act::Flat(_)) => flat,
                (Built::Dropout(rate), Act::Flat(x)) => Act::Flat(dropout(g, x, *rate, training, rng)?),
                (Built::Dropout(rate), Act::Seq(xs)) => Act::Seq(
                    xs.into_iter()
                        .map(|x| dropout(g, x, *rate, training, rng))
                        .collect::<Result<_, _>>()?,
                ),
                (Built::BatchNorm(bn), Act::Flat(x)) => {
                    let (y, stats) = bn.apply(g, bind, &self.store, x, training)?;
                    bn_stats.extend(stats.map(|s| (idx, s)));
                    Act::Flat(y)
                }
                (Built::BatchNorm(bn), Act::Seq(xs)) => {
                    let (ys, stats) = bn.apply_seq(g, bind, &self.store, &xs, training)?;
                    bn_stats.extend(stats.map(|s| (idx, s)));
                    Act::Seq(ys)
                }
                (Built::Relu, Act::Flat(x)) => Act::Flat(g.relu(x)?),
                (Built::Relu, Act::Seq(xs)) => {
                    Act::Seq(xs.into_iter().map(|x| g.relu(x)).collect::<Result<_, _>>()?)
                }
                _ => return Err(ModelError::Spec(format!("layer {idx} received the wrong shape"))),
            };
        }
        match act {
            Act::Flat(output) => Ok(Forward { output, bn_stats }),
            Act::Seq(_) => Err(ModelError::Spec("network ends in a sequence".into())),
        }
    }

    /// Folds training-mode batch statistics into the running averages.
    pub fn update_running_stats(&mut self, stats: &[(usize, BatchStats)]) {
        for (idx, s) in stats {
            if let Built::BatchNorm(bn) = &self.layers[*idx] {
                bn.update_running(&mut self.store, s);
            }
        }
    }

    /// Inference-mode predictions (dropout off, running batch-norm statistics).
    pub fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>, ModelError> {
        for s in samples {
            check_normalized(s)?;
        }
        // Inference draws no random numbers; the generator only satisfies the signature.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(PREDICT_BATCH) {
            let refs: Vec<&WindowSample> = chunk.iter().collect();
            let mut g = Graph::new();
            let bind = g.bind(&self.store)?;
            let fwd = self.forward(&mut g, &bind, &refs, false, &mut rng)?;
            out.extend_from_slice(g.value(fwd.output).data());
        }
        Ok(out)
    }

    pub fn predict_one(&self, sample: &WindowSample) -> Result<f64, ModelError> {
        Ok(self.predict(std::slice::from_ref(sample))?[0])
    }
}

fn seq_or_flat(mut hs: Vec<NodeId>, mode: SeqMode) -> Act {
    match mode {
        SeqMode::AllSteps => Act::Seq(hs),
        SeqMode::Last => Act::Flat(hs.pop().expect("non-empty sequence")),
    }
}

pub(crate) fn check_normalized(sample: &WindowSample) -> Result<(), ModelError> {
    if let Some(v) = sample
        .x
        .iter()
        .flatten()
        .find(|v| !v.is_finite() || v.abs() > MAX_NORMALIZED_MAGNITUDE)
    {
        return Err(ModelError::Unnormalized {
            player_id: sample.player_id.clone(),
            value: *v,
        });
    }
    Ok(())
}
