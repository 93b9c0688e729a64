//! Inverted dropout with an explicit seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Matrix;

/// Per-element multipliers: `0` with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, seed: u64) -> Matrix {
    assert!((0.0..1.0).contains(&rate), "dropout rate {rate} not in [0, 1)");
    let keep = 1.0 / (1.0 - rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape")
}

/// Returns the output and, in training with `rate > 0`, the mask used.
pub fn dropout_forward(x: &Matrix, rate: f64, training: bool, seed: u64) -> (Matrix, Option<Matrix>) {
    if !training || rate == 0.0 {
        return (x.clone(), None);
    }
    let mask = dropout_mask(x.rows(), x.cols(), rate, seed);
    let mut y = x.clone();
    for (v, m) in y.data_mut().iter_mut().zip(mask.data()) {
        *v *= m;
    }
    (y, Some(mask))
}

pub fn dropout_backward(dy: &Matrix, mask: Option<&Matrix>) -> Matrix {
    let mut dx = dy.clone();
    if let Some(mask) = mask {
        for (v, m) in dx.data_mut().iter_mut().zip(mask.data()) {
            *v *= m;
        }
    }
    dx
}
