use rand::Rng;

use super::{init_uniform, Matrix, Parameterized, TensorView};
use crate::Result;

/// Row-wise affine map `y_t = W x_t + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `out x in`.
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            w: Matrix::zeros(output_dim, input_dim),
            b: vec![0.0; output_dim],
        }
    }

    pub fn init(input_dim: usize, output_dim: usize, rng: &mut impl Rng) -> Self {
        let w = init_uniform(rng, input_dim * output_dim, input_dim);
        Self {
            w: Matrix::from_vec(output_dim, input_dim, w).expect("shape"),
            b: vec![0.0; output_dim],
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        x.ensure_shape(x.rows(), self.w.cols(), "linear input")?;
        let mut y = Matrix::zeros(x.rows(), self.w.rows());
        for t in 0..x.rows() {
            let row = y.row_mut(t);
            row.copy_from_slice(&self.b);
            self.w.gemv_acc(x.row(t), row);
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Matrix, dy: &Matrix, grads: &mut Linear) -> Matrix {
        let mut dx = Matrix::zeros(x.rows(), self.w.cols());
        for t in 0..x.rows() {
            grads.w.outer_acc(dy.row(t), x.row(t));
            for (g, d) in grads.b.iter_mut().zip(dy.row(t)) {
                *g += d;
            }
            self.w.gemv_t_acc(dy.row(t), dx.row_mut(t));
        }
        dx
    }
}

impl Parameterized for Linear {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        vec![
            TensorView { name: "w".into(), shape: self.w.shape(), data: self.w.data() },
            TensorView { name: "b".into(), shape: [1, self.b.len()], data: &self.b },
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.data_mut(), &mut self.b]
    }
}
