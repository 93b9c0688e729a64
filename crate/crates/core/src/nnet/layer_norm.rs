//! Per-row layer normalization with learned gain and bias.

use super::{Matrix, Parameterized, TensorView};
use crate::Result;

pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
}

impl LayerNormParams {
    /// Unit gain, zero bias.
    pub fn new(dim: usize) -> Self {
        Self {
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            gain: vec![0.0; dim],
            bias: vec![0.0; dim],
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn dim(&self) -> usize {
        self.gain.len()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, LayerNormCache)> {
        let d = self.dim();
        x.ensure_shape(x.rows(), d, "layer norm input")?;
        let mut normalized = Matrix::zeros(x.rows(), d);
        let mut out = Matrix::zeros(x.rows(), d);
        let mut inv_std = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + self.epsilon).sqrt();
            inv_std.push(is);
            for k in 0..d {
                let n = (row[k] - mean) * is;
                normalized.set(r, k, n);
                out.set(r, k, n * self.gain[k] + self.bias[k]);
            }
        }
        Ok((out, LayerNormCache { normalized, inv_std }))
    }

    pub fn backward(&self, cache: &LayerNormCache, dy: &Matrix, grads: &mut LayerNormParams) -> Matrix {
        let d = self.dim();
        let mut dx = Matrix::zeros(dy.rows(), d);
        let mut dn = vec![0.0; d];
        for r in 0..dy.rows() {
            let n = cache.normalized.row(r);
            let g = dy.row(r);
            for k in 0..d {
                grads.gain[k] += g[k] * n[k];
                grads.bias[k] += g[k];
                dn[k] = g[k] * self.gain[k];
            }
            let mean_dn = dn.iter().sum::<f64>() / d as f64;
            let mean_dn_n = dn.iter().zip(n).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            let is = cache.inv_std[r];
            for (k, out) in dx.row_mut(r).iter_mut().enumerate() {
                *out = is * (dn[k] - mean_dn - n[k] * mean_dn_n);
            }
        }
        dx
    }
}

pub fn layer_norm_forward(p: &LayerNormParams, x: &Matrix) -> Result<Matrix> {
    Ok(p.forward(x)?.0)
}

impl Parameterized for LayerNormParams {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        vec![
            TensorView { name: "gain".into(), shape: [1, self.gain.len()], data: &self.gain },
            TensorView { name: "bias".into(), shape: [1, self.bias.len()], data: &self.bias },
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.gain, &mut self.bias]
    }
}
