use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::ingest::{NUM_FEATURES, WINDOW};
use crate::layers::{
    Activation, AdditiveAttention, AttentionOutput, BatchNorm, BiLstm, Dense, GruCell, LayerSpec,
    LstmCell, RnnCell,
};

pub const BUILTIN_NAMES: [&str; 9] = ["A", "B", "C", "D", "E", "gru", "bilstm", "at_lstm", "nn"];

/// Activation shape flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Seq { steps: usize, width: usize },
    Flat(usize),
}

impl Shape {
    pub fn width(self) -> usize {
        match self {
            Shape::Seq { width, .. } | Shape::Flat(width) => width,
        }
    }
}

/// Declarative network: an ordered layer list over a `steps × features` input ending in one
/// ReLU unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub steps: usize,
    pub features: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>) -> Self {
        Self {
            name: name.into(),
            steps: WINDOW,
            features: NUM_FEATURES,
            layers,
        }
    }

    /// Shape after each layer; checks adjacency rules and the single-ReLU-unit head.
    pub fn shapes(&self) -> Result<Vec<Shape>, ModelError> {
        let mut shape = Shape::Seq {
            steps: self.steps,
            width: self.features,
        };
        let mut out = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate() {
            let bad = |why: &str| ModelError::Spec(format!("layer {idx} ({}): {why}", layer.kind()));
            if let Some(0) = layer.units() {
                return Err(bad("width must be positive"));
            }
            shape = match (layer, shape) {
                (
                    LayerSpec::Rnn { units, return_sequences }
                    | LayerSpec::Lstm { units, return_sequences }
                    | LayerSpec::Gru { units, return_sequences },
                    Shape::Seq { steps, .. },
                ) => recurrent_shape(steps, *units, *return_sequences),
                (LayerSpec::Bilstm { units, return_sequences }, Shape::Seq { steps, .. }) => {
                    recurrent_shape(steps, 2 * units, *return_sequences)
                }
                (LayerSpec::Attention { output }, Shape::Seq { steps, width }) => match output {
                    AttentionOutput::Context => Shape::Flat(width),
                    AttentionOutput::Reweighted => Shape::Seq { steps, width },
                },
                (LayerSpec::Dense { units, .. }, Shape::Flat(_)) => Shape::Flat(*units),
                (LayerSpec::TdDense { units, .. }, Shape::Seq { steps, .. }) => Shape::Seq {
                    steps,
                    width: *units,
                },
                (LayerSpec::Flatten, Shape::Seq { steps, width }) => Shape::Flat(steps * width),
                (LayerSpec::Flatten, flat @ Shape::Flat(_)) => flat,
                (LayerSpec::Dropout { rate }, s) => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(bad("dropout rate outside [0, 1)"));
                    }
                    s
                }
                (LayerSpec::Batchnorm | LayerSpec::Relu, s) => s,
                (_, Shape::Flat(_)) => return Err(bad("needs a sequence input")),
                (_, Shape::Seq { .. }) => return Err(bad("needs a flat input; add flatten")),
            };
            out.push(shape);
        }
        match self.layers.last() {
            Some(LayerSpec::Dense {
                units: 1,
                activation: Activation::Relu,
            }) => Ok(out),
            _ => Err(ModelError::Spec(
                "final layer must be a 1-unit ReLU dense layer".into(),
            )),
        }
    }

    /// Parameter count from the layer formulas, batch-norm running statistics included.
    pub fn param_count(&self) -> Result<usize, ModelError> {
        let shapes = self.shapes()?;
        let mut input = Shape::Seq {
            steps: self.steps,
            width: self.features,
        };
        let mut total = 0;
        for (layer, &out) in self.layers.iter().zip(&shapes) {
            let n = input.width();
            total += match layer {
                LayerSpec::Rnn { units, .. } => RnnCell::param_count(n, *units),
                LayerSpec::Lstm { units, .. } => LstmCell::param_count(n, *units),
                LayerSpec::Gru { units, .. } => GruCell::param_count(n, *units),
                LayerSpec::Bilstm { units, .. } => BiLstm::param_count(n, *units),
                LayerSpec::Attention { .. } => AdditiveAttention::param_count(n),
                LayerSpec::Dense { units, .. } | LayerSpec::TdDense { units, .. } => {
                    Dense::param_count(n, *units)
                }
                LayerSpec::Batchnorm => BatchNorm::param_count(n),
                LayerSpec::Flatten | LayerSpec::Dropout { .. } | LayerSpec::Relu => 0,
            };
            input = out;
        }
        Ok(total)
    }

    /// Widths of recurrent and dense layers in order.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().filter_map(LayerSpec::units).collect()
    }
}

fn recurrent_shape(steps: usize, width: usize, return_sequences: bool) -> Shape {
    if return_sequences {
        Shape::Seq { steps, width }
    } else {
        Shape::Flat(width)
    }
}

fn head() -> LayerSpec {
    LayerSpec::dense(1)
}

fn dropout() -> LayerSpec {
    LayerSpec::Dropout { rate: 0.5 }
}

/// Built-in architectures. Recurrent layers return full sequences which are flattened before
/// the fully connected stack; hidden dense layers use ReLU.
pub fn builtin_spec(name: &str) -> Result<ModelSpec, ModelError> {
    use LayerSpec as L;
    let layers = match name {
        "A" => vec![
            L::lstm(128),
            L::lstm(128),
            dropout(),
            L::Flatten,
            L::dense(1024),
            dropout(),
            head(),
        ],
        "B" => vec![
            L::lstm(32),
            L::lstm(16),
            L::lstm(8),
            dropout(),
            L::Flatten,
            L::dense(512),
            dropout(),
            L::dense(64),
            head(),
        ],
        "C" => vec![
            L::lstm(32),
            L::lstm(32),
            L::Batchnorm,
            L::Flatten,
            L::dense(512),
            L::Batchnorm,
            L::dense(64),
            head(),
        ],
        "D" => vec![
            L::lstm(64),
            L::lstm(64),
            dropout(),
            L::TdDense {
                units: 10,
                activation: Activation::Linear,
            },
            L::Flatten,
            L::dense(512),
            dropout(),
            L::dense(64),
            head(),
        ],
        "E" => vec![
            L::lstm(32),
            L::lstm(32),
            dropout(),
            L::Flatten,
            L::dense(512),
            dropout(),
            L::dense(64),
            head(),
        ],
        "gru" => vec![
            L::gru(64),
            L::gru(64),
            L::Flatten,
            L::dense(512),
            L::dense(64),
            head(),
        ],
        "bilstm" => vec![
            L::bilstm(64),
            L::bilstm(64),
            L::Flatten,
            L::dense(512),
            L::dense(64),
            head(),
        ],
        "at_lstm" => vec![
            L::bilstm(64),
            L::Attention {
                output: AttentionOutput::Reweighted,
            },
            L::Lstm {
                units: 64,
                return_sequences: false,
            },
            L::dense(512),
            L::dense(64),
            head(),
        ],
        "nn" => vec![
            L::Flatten,
            L::dense(1024),
            L::dense(512),
            L::dense(128),
            head(),
        ],
        other => {
            return Err(ModelError::UnknownModel {
                name: other.to_string(),
                valid: BUILTIN_NAMES.join(", "),
            })
        }
    };
    Ok(ModelSpec::new(name, layers))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_parameter_counts() {
        let expected = [
            ("A", 865_793),
            ("B", 64_737),
            ("C", 132_737),
            ("D", 114_699),
            ("E", 130_561),
        ];
        for (name, count) in expected {
            assert_eq!(builtin_spec(name).unwrap().param_count().unwrap(), count, "model {name}");
        }
    }

    #[test]
    fn model_a_decomposition() {
        assert_eq!(LstmCell::param_count(21, 128), 76_800);
        assert_eq!(LstmCell::param_count(128, 128), 131_584);
        assert_eq!(Dense::param_count(640, 1024), 656_384);
        assert_eq!(Dense::param_count(1024, 1), 1_025);
        assert_eq!(76_800 + 131_584 + 656_384 + 1_025, 865_793);
        assert_eq!(LstmCell::param_count(21, 32), 6_912);
    }

    #[test]
    fn td_width_is_unique_solution() {
        let solutions: Vec<usize> = (1..=64)
            .filter(|&d| 22_016 + 33_024 + (64 * d + d) + (5 * d * 512 + 512) + 32_832 + 65 == 114_699)
            .collect();
        assert_eq!(solutions, vec![10]);
    }

    #[test]
    fn widths_and_flags() {
        assert_eq!(builtin_spec("E").unwrap().widths(), vec![32, 32, 512, 64, 1]);
        let nn = builtin_spec("nn").unwrap().widths();
        assert_eq!(&nn[..3], &[1024, 512, 128]);
        let d = builtin_spec("D").unwrap();
        assert!(d.layers.iter().any(|l| matches!(l, LayerSpec::TdDense { .. })));
    }

    #[test]
    fn every_builtin_is_well_formed() {
        for name in BUILTIN_NAMES {
            let spec = builtin_spec(name).unwrap();
            assert_eq!(spec.shapes().unwrap().last(), Some(&Shape::Flat(1)), "{name}");
        }
    }

    #[test]
    fn unknown_name_lists_valid() {
        let err = builtin_spec("Q").unwrap_err().to_string();
        assert!(err.contains("Q") && err.contains("at_lstm"), "{err}");
    }

    #[test]
    fn malformed_specs_rejected() {
        let no_flatten = ModelSpec::new("x", vec![LayerSpec::lstm(4), LayerSpec::dense(1)]);
        assert!(no_flatten.shapes().is_err());
        let linear_head = ModelSpec::new(
            "x",
            vec![
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    units: 1,
                    activation: Activation::Linear,
                },
            ],
        );
        assert!(linear_head.shapes().is_err());
        let zero = ModelSpec::new("x", vec![LayerSpec::lstm(0), LayerSpec::Flatten, LayerSpec::dense(1)]);
        assert!(zero.shapes().is_err());
    }
}
