use rand::Rng;

use crate::ndkernel::Tensor;

/// Glorot-uniform weights: `U(−l, l)` with `l = √(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    Tensor::new(vec![rows, cols], data).expect("rows × cols values")
}

pub fn zeros_bias(len: usize) -> Tensor {
    Tensor::zeros(&[len])
}
