use rand::Rng;

use super::{init_uniform, Matrix, Parameterized, TensorView};
use crate::{Error, Result};

/// Lookup table of `vocab_size` vectors of width `emb_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vectors: Matrix,
}

impl EmbeddingTable {
    pub fn zeros(vocab_size: usize, emb_dim: usize) -> Self {
        Self {
            vectors: Matrix::zeros(vocab_size, emb_dim),
        }
    }

    /// Uniform in `[-1, 1]`: a one-hot input has fan-in 1.
    pub fn init(vocab_size: usize, emb_dim: usize, rng: &mut impl Rng) -> Self {
        let data = init_uniform(rng, vocab_size * emb_dim, 1);
        Self {
            vectors: Matrix::from_vec(vocab_size, emb_dim, data).expect("shape"),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vectors.rows()
    }

    pub fn emb_dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn lookup(&self, index: usize) -> Result<&[f64]> {
        if index >= self.vocab_size() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.vocab_size(),
            });
        }
        Ok(self.vectors.row(index))
    }

    pub fn accumulate_grad(&mut self, index: usize, grad: &[f64]) {
        for (g, d) in self.vectors.row_mut(index).iter_mut().zip(grad) {
            *g += d;
        }
    }
}

impl Parameterized for EmbeddingTable {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        vec![TensorView {
            name: "vectors".into(),
            shape: self.vectors.shape(),
            data: self.vectors.data(),
        }]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.vectors.data_mut()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_bounds() {
        let mut t = EmbeddingTable::zeros(3, 2);
        t.accumulate_grad(1, &[1.0, 2.0]);
        assert_eq!(t.lookup(1).unwrap(), &[1.0, 2.0]);
        assert!(matches!(t.lookup(3), Err(Error::IndexOutOfRange { index: 3, len: 3 })));
    }
}
