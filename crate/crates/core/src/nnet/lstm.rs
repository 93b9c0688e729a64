//! Unidirectional and bidirectional LSTM without peepholes.
//!
//! Gate pre-activations are stacked `[input, forget, cell, output]`:
//!
//! ```text
//! z_t = W_x x_t + W_h h_{t-1} + b
//! i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```

use rand::Rng;

use super::{init_uniform, prefixed, sigmoid, Matrix, Parameterized, TensorView};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `4H x D`.
    pub w_x: Matrix,
    /// `4H x H`.
    pub w_h: Matrix,
    /// `4H`.
    pub b: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w_x: Matrix::zeros(4 * hidden_dim, input_dim),
            w_h: Matrix::zeros(4 * hidden_dim, hidden_dim),
            b: vec![0.0; 4 * hidden_dim],
        }
    }

    /// Uniform weights over the gate fan-in; forget-gate bias 1, other biases 0.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let fan_in = input_dim + hidden_dim;
        let h4 = 4 * hidden_dim;
        let mut p = Self::zeros(input_dim, hidden_dim);
        p.w_x = Matrix::from_vec(h4, input_dim, init_uniform(rng, h4 * input_dim, fan_in))
            .expect("shape");
        p.w_h = Matrix::from_vec(h4, hidden_dim, init_uniform(rng, h4 * hidden_dim, fan_in))
            .expect("shape");
        p.b[hidden_dim..2 * hidden_dim].fill(1.0);
        p
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, LstmCache)> {
        x.ensure_shape(x.rows(), self.input_dim, "lstm input")?;
        let h = self.hidden_dim;
        let t_len = x.rows();
        let mut cache = LstmCache {
            x: x.clone(),
            gates: Matrix::zeros(t_len, 4 * h),
            c: Matrix::zeros(t_len, h),
            tanh_c: Matrix::zeros(t_len, h),
            h: Matrix::zeros(t_len, h),
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut z = vec![0.0; 4 * h];
        for t in 0..t_len {
            z.copy_from_slice(&self.b);
            self.w_x.gemv_acc(x.row(t), &mut z);
            self.w_h.gemv_acc(&h_prev, &mut z);
            let gates = cache.gates.row_mut(t);
            for k in 0..h {
                gates[k] = sigmoid(z[k]);
                gates[h + k] = sigmoid(z[h + k]);
                gates[2 * h + k] = z[2 * h + k].tanh();
                gates[3 * h + k] = sigmoid(z[3 * h + k]);
            }
            let gates = cache.gates.row(t).to_vec();
            for k in 0..h {
                let c = gates[h + k] * c_prev[k] + gates[k] * gates[2 * h + k];
                let tc = c.tanh();
                cache.c.set(t, k, c);
                cache.tanh_c.set(t, k, tc);
                cache.h.set(t, k, gates[3 * h + k] * tc);
            }
            h_prev.copy_from_slice(cache.h.row(t));
            c_prev.copy_from_slice(cache.c.row(t));
        }
        Ok((cache.h.clone(), cache))
    }

    /// Back-propagation through time. Accumulates into `grads` and returns `dL/dx`.
    pub fn backward(&self, cache: &LstmCache, d_h_out: &Matrix, grads: &mut LstmParams) -> Matrix {
        let h = self.hidden_dim;
        let t_len = cache.x.rows();
        let mut dx = Matrix::zeros(t_len, self.input_dim);
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        let zeros = vec![0.0; h];
        for t in (0..t_len).rev() {
            let gates = cache.gates.row(t);
            let c_prev = if t > 0 { cache.c.row(t - 1) } else { &zeros };
            let h_prev = if t > 0 { cache.h.row(t - 1) } else { &zeros };
            for k in 0..h {
                let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                let tc = cache.tanh_c.get(t, k);
                let dh = d_h_out.get(t, k) + dh_next[k];
                let d_o = dh * tc;
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                dz[k] = dc * g * i * (1.0 - i);
                dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
                dz[2 * h + k] = dc * i * (1.0 - g * g);
                dz[3 * h + k] = d_o * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            grads.w_x.outer_acc(&dz, cache.x.row(t));
            grads.w_h.outer_acc(&dz, h_prev);
            for (gb, d) in grads.b.iter_mut().zip(&dz) {
                *gb += d;
            }
            self.w_x.gemv_t_acc(&dz, dx.row_mut(t));
            dh_next.fill(0.0);
            self.w_h.gemv_t_acc(&dz, &mut dh_next);
        }
        dx
    }
}

impl Parameterized for LstmParams {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        vec![
            TensorView { name: "w_x".into(), shape: self.w_x.shape(), data: self.w_x.data() },
            TensorView { name: "w_h".into(), shape: self.w_h.shape(), data: self.w_h.data() },
            TensorView { name: "b".into(), shape: [1, self.b.len()], data: &self.b },
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w_x.data_mut(), self.w_h.data_mut(), &mut self.b]
    }
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Matrix,
    gates: Matrix,
    c: Matrix,
    tanh_c: Matrix,
    h: Matrix,
}

/// Forward and backward LSTMs over the same input; output `T x 2H` is
/// `[forward | backward]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
}

impl BiLstm {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            fwd: LstmParams::zeros(input_dim, hidden_dim),
            bwd: LstmParams::zeros(input_dim, hidden_dim),
        }
    }

    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            fwd: LstmParams::init(input_dim, hidden_dim, rng),
            bwd: LstmParams::init(input_dim, hidden_dim, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.fwd.input_dim
    }

    pub fn output_dim(&self) -> usize {
        2 * self.fwd.hidden_dim
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, BiLstmCache)> {
        let (hf, fwd) = self.fwd.forward(x)?;
        let (hb_rev, bwd) = self.bwd.forward(&x.reversed_rows())?;
        Ok((hf.hcat(&hb_rev.reversed_rows())?, BiLstmCache { fwd, bwd }))
    }

    pub fn backward(&self, cache: &BiLstmCache, d_out: &Matrix, grads: &mut BiLstm) -> Matrix {
        let h = self.fwd.hidden_dim;
        let d_fwd = d_out.cols_range(0, h);
        let d_bwd_rev = d_out.cols_range(h, 2 * h).reversed_rows();
        let mut dx = self.fwd.backward(&cache.fwd, &d_fwd, &mut grads.fwd);
        let dx_b = self
            .bwd
            .backward(&cache.bwd, &d_bwd_rev, &mut grads.bwd)
            .reversed_rows();
        for (a, b) in dx.data_mut().iter_mut().zip(dx_b.data()) {
            *a += b;
        }
        dx
    }
}

/// Forward pass without keeping the cache.
pub fn bilstm_forward(p: &BiLstm, x: &Matrix) -> Result<Matrix> {
    Ok(p.forward(x)?.0)
}

impl Parameterized for BiLstm {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut v = prefixed("fwd", self.fwd.tensors());
        v.extend(prefixed("bwd", self.bwd.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.fwd.tensors_mut();
        v.extend(self.bwd.tensors_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::finite_diff_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    /// Scalar-loop LSTM written straight from the recurrence, one direction.
    fn reference_lstm(p: &LstmParams, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let hd = p.hidden_dim;
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut out = Vec::new();
        for x in xs {
            let mut pre = vec![0.0; 4 * hd];
            for (r, pr) in pre.iter_mut().enumerate() {
                let mut s = p.b[r];
                for j in 0..p.input_dim {
                    s += p.w_x.get(r, j) * x[j];
                }
                for j in 0..hd {
                    s += p.w_h.get(r, j) * h[j];
                }
                *pr = s;
            }
            let mut nh = vec![0.0; hd];
            for k in 0..hd {
                let i = sig(pre[k]);
                let f = sig(pre[hd + k]);
                let g = pre[2 * hd + k].tanh();
                let o = sig(pre[3 * hd + k]);
                c[k] = f * c[k] + i * g;
                nh[k] = o * c[k].tanh();
            }
            h = nh;
            out.push(h.clone());
        }
        out
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = BiLstm::zeros(3, 4);
        let x = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.5, 0.5]).unwrap();
        let y = bilstm_forward(&p, &x).unwrap();
        assert_eq!(y.shape(), [2, 8]);
        assert!(y.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_step_directions_agree_when_weights_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dir = LstmParams::init(2, 3, &mut rng);
        let p = BiLstm { fwd: dir.clone(), bwd: dir };
        let x = random_matrix(1, 2, &mut rng);
        let y = bilstm_forward(&p, &x).unwrap();
        assert_eq!(&y.row(0)[..3], &y.row(0)[3..]);
    }

    #[test]
    fn matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let p = BiLstm::init(2, 4, &mut rng);
        let x = random_matrix(3, 2, &mut rng);
        let y = bilstm_forward(&p, &x).unwrap();
        let rows: Vec<Vec<f64>> = (0..3).map(|t| x.row(t).to_vec()).collect();
        let fwd = reference_lstm(&p.fwd, &rows);
        let rev: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
        let mut bwd = reference_lstm(&p.bwd, &rev);
        bwd.reverse();
        for t in 0..3 {
            for k in 0..4 {
                assert!((y.get(t, k) - fwd[t][k]).abs() < 1e-10);
                assert!((y.get(t, 4 + k) - bwd[t][k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn time_reversal_swaps_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = BiLstm::init(3, 2, &mut rng);
        let x = random_matrix(5, 3, &mut rng);
        let y = bilstm_forward(&p, &x).unwrap();
        let swapped = BiLstm { fwd: p.bwd.clone(), bwd: p.fwd.clone() };
        let y_rev = bilstm_forward(&swapped, &x.reversed_rows()).unwrap();
        // [fwd|bwd](x) reversed in time equals [bwd|fwd] run on reversed x
        assert_eq!(y.reversed_rows(), y_rev.cols_range(2, 4).hcat(&y_rev.cols_range(0, 2)).unwrap());
        // and with shared weights, forward half of reversed input is the reversed backward half
        let shared = BiLstm { fwd: p.fwd.clone(), bwd: p.fwd.clone() };
        let a = bilstm_forward(&shared, &x).unwrap();
        let b = bilstm_forward(&shared, &x.reversed_rows()).unwrap();
        assert_eq!(b.cols_range(0, 2), a.cols_range(2, 4).reversed_rows());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = BiLstm::zeros(3, 2);
        assert!(bilstm_forward(&p, &Matrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = BiLstm::init(3, 4, &mut rng);
        let x = random_matrix(5, 3, &mut rng);
        let probe = random_matrix(5, 8, &mut rng);
        let loss = |p: &BiLstm, x: &Matrix| -> f64 {
            let y = bilstm_forward(p, x).unwrap();
            y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = p.forward(&x).unwrap();
        let mut grads = BiLstm::zeros(3, 4);
        let dx = p.backward(&cache, &probe, &mut grads);

        let report = finite_diff_check(
            |flat| {
                let mut q = p.clone();
                q.assign_flat(flat);
                loss(&q, &x)
            },
            &p.flatten(),
            &grads.flatten(),
            1e-5,
        );
        assert!(report.max_rel_error < 1e-4, "{report:?}");

        let report = finite_diff_check(
            |flat| loss(&p, &Matrix::from_vec(5, 3, flat.to_vec()).unwrap()),
            x.data(),
            dx.data(),
            1e-5,
        );
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
