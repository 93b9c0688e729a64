//! The decoder's multitask spectral loss, usable without any acoustic model.
//!
//! ```
//! use prosoctl::nnet::Matrix;
//! use prosoctl::s2s_loss::{multitask_loss, LossInputs, LPC_DIM, MEL_DIM};
//!
//! let mel = Matrix::zeros(3, MEL_DIM);
//! let lpc = Matrix::zeros(3, LPC_DIM);
//! let inputs = LossInputs::new(mel.clone(), mel, lpc.clone(), lpc.clone(), lpc).unwrap();
//! assert_eq!(multitask_loss(&inputs).unwrap(), 0.0);
//! ```

use crate::nnet::Matrix;
use crate::{Error, Result};

pub const MEL_DIM: usize = 80;
/// 20 cepstral coefficients, log f0 and f0 correlation.
pub const LPC_DIM: usize = 22;

pub const PRE_NET_WEIGHT: f64 = 0.8;
pub const POST_NET_WEIGHT: f64 = 0.4;
pub const DELTA_WEIGHT: f64 = 0.4;

/// First difference in time: row `t` is `seq[t + 1] - seq[t]`.
pub fn delta(seq: &Matrix) -> Result<Matrix> {
    if seq.rows() < 2 {
        return Err(Error::Shape(format!("delta needs at least 2 frames, got {}", seq.rows())));
    }
    let mut out = Matrix::zeros(seq.rows() - 1, seq.cols());
    for t in 0..out.rows() {
        for (o, (a, b)) in out
            .row_mut(t)
            .iter_mut()
            .zip(seq.row(t + 1).iter().zip(seq.row(t)))
        {
            *o = a - b;
        }
    }
    Ok(out)
}

/// Mean squared error over every element.
pub fn mse(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("mse of {:?} and {:?}", a.shape(), b.shape())));
    }
    let n = a.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
    Ok(sum / n as f64)
}

/// Decoder outputs and their targets for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct LossInputs {
    pub mel_pred: Matrix,
    pub mel_target: Matrix,
    /// LPC-domain features before the post-net.
    pub lpc_pre: Matrix,
    /// LPC-domain features after the post-net.
    pub lpc_post: Matrix,
    pub lpc_target: Matrix,
}

impl LossInputs {
    pub fn new(
        mel_pred: Matrix,
        mel_target: Matrix,
        lpc_pre: Matrix,
        lpc_post: Matrix,
        lpc_target: Matrix,
    ) -> Result<Self> {
        let t = mel_pred.rows();
        let expected = [
            ("mel_pred", &mel_pred, MEL_DIM),
            ("mel_target", &mel_target, MEL_DIM),
            ("lpc_pre", &lpc_pre, LPC_DIM),
            ("lpc_post", &lpc_post, LPC_DIM),
            ("lpc_target", &lpc_target, LPC_DIM),
        ];
        for (name, m, width) in expected {
            if m.shape() != [t, width] {
                return Err(Error::Shape(format!(
                    "{name} is {:?}, expected [{t}, {width}]",
                    m.shape()
                )));
            }
        }
        Ok(Self {
            mel_pred,
            mel_target,
            lpc_pre,
            lpc_post,
            lpc_target,
        })
    }

    pub fn frames(&self) -> usize {
        self.mel_pred.rows()
    }
}

pub fn multitask_loss(inputs: &LossInputs) -> Result<f64> {
    let mel = mse(&inputs.mel_pred, &inputs.mel_target)?;
    let pre = mse(&inputs.lpc_pre, &inputs.lpc_target)?;
    let post = mse(&inputs.lpc_post, &inputs.lpc_target)?;
    let dynamics = mse(&delta(&inputs.lpc_post)?, &delta(&inputs.lpc_target)?)?;
    Ok(mel + PRE_NET_WEIGHT * pre + POST_NET_WEIGHT * post + DELTA_WEIGHT * dynamics)
}
