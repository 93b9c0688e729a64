//! Small double-precision neural kernel with hand-written gradients.
//!
//! Every trainable layer stores its parameters as plain `f64` buffers and
//! exposes them through [`Parameterized`]; gradients use the same struct type
//! as the parameters, so an optimizer can walk both in lockstep.

mod adam;
mod dropout;
mod embedding;
mod gradcheck;
mod layer_norm;
mod linear;
mod lstm;
mod matrix;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use dropout::{dropout_backward, dropout_forward, dropout_mask};
pub use embedding::EmbeddingTable;
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use layer_norm::{layer_norm_forward, LayerNormCache, LayerNormParams};
pub use linear::Linear;
pub use lstm::{bilstm_forward, BiLstm, BiLstmCache, LstmCache, LstmParams};
pub use matrix::Matrix;

use rand::Rng;

/// Named view of one parameter tensor.
pub struct TensorView<'a> {
    pub name: String,
    pub shape: [usize; 2],
    pub data: &'a [f64],
}

pub trait Parameterized {
    /// All tensors in a fixed order, with names and shapes.
    fn tensors(&self) -> Vec<TensorView<'_>>;

    /// Mutable buffers, in the same order as [`Parameterized::tensors`].
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter().copied())
            .collect()
    }

    /// Overwrites all parameters from a flat buffer produced by [`Parameterized::flatten`].
    fn assign_flat(&mut self, flat: &[f64]) {
        let mut at = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[at..at + t.len()]);
            at += t.len();
        }
        assert_eq!(at, flat.len(), "flat parameter length mismatch");
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    /// `self += other`, element-wise; shapes must agree.
    fn add_assign(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src = other.tensors();
        for (dst, s) in self.tensors_mut().into_iter().zip(src) {
            for (d, v) in dst.iter_mut().zip(s.data) {
                *d += v;
            }
        }
    }

    fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }
}

pub(crate) fn prefixed<'a>(prefix: &str, views: Vec<TensorView<'a>>) -> Vec<TensorView<'a>> {
    views
        .into_iter()
        .map(|mut v| {
            v.name = format!("{prefix}.{}", v.name);
            v
        })
        .collect()
}

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub(crate) fn init_uniform(rng: &mut impl Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
