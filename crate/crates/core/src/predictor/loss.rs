use crate::features::{PhoneTargets, N_PC};
use crate::nnet::Matrix;
use crate::Result;

fn check(pred: &Matrix, targets: &PhoneTargets) -> Result<()> {
    pred.ensure_shape(targets.len(), N_PC, "prediction vs targets")
}

/// `sum_{t,k} alpha_k * w_{t,k} * |pred_{t,k} - target_{t,k}|`, unnormalized.
pub fn weighted_l1_loss(pred: &Matrix, targets: &PhoneTargets, alpha: &[f64; N_PC]) -> Result<f64> {
    check(pred, targets)?;
    let mut loss = 0.0;
    for t in 0..pred.rows() {
        for k in 0..N_PC {
            loss += alpha[k] * targets.weights.get(t, k) * (pred.get(t, k) - targets.targets.get(t, k)).abs();
        }
    }
    Ok(loss)
}

/// Subgradient of [`weighted_l1_loss`] w.r.t. `pred` (zero at exact ties).
pub fn weighted_l1_grad(pred: &Matrix, targets: &PhoneTargets, alpha: &[f64; N_PC]) -> Result<Matrix> {
    check(pred, targets)?;
    let mut g = Matrix::zeros(pred.rows(), N_PC);
    for t in 0..pred.rows() {
        for k in 0..N_PC {
            let diff = pred.get(t, k) - targets.targets.get(t, k);
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            g.set(t, k, alpha[k] * targets.weights.get(t, k) * sign);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{flat_track, word};
    use crate::corpus::Utterance;
    use crate::features::expand_to_phones;
    use proptest::prelude::*;

    const ALPHA: [f64; 4] = [1.0, 1.0, 1.5, 3.5];

    fn one_word_targets() -> PhoneTargets {
        let u = Utterance {
            id: "x".into(),
            speaker: 0,
            words: vec![word("a", 2, 0.0, 0.2, false)],
            f0_track: flat_track(0.2, 100.0),
        };
        expand_to_phones(&u, &[[0.2, -0.1, 0.5, 1.0]]).unwrap()
    }

    #[test]
    fn exact_prediction_has_zero_loss() {
        let t = one_word_targets();
        assert_eq!(weighted_l1_loss(&t.targets, &t, &ALPHA).unwrap(), 0.0);
    }

    #[test]
    fn unit_errors_sum_the_target_weights() {
        let t = one_word_targets();
        let mut pred = t.targets.clone();
        pred.data_mut().iter_mut().enumerate().for_each(|(i, v)| *v += if i % 2 == 0 { 1.0 } else { -1.0 });
        let loss = weighted_l1_loss(&pred, &t, &ALPHA).unwrap();
        assert!((loss - 7.0).abs() < 1e-12);
        let doubled = ALPHA.map(|a| 2.0 * a);
        assert!((weighted_l1_loss(&pred, &t, &doubled).unwrap() - 14.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let t = one_word_targets();
        assert!(weighted_l1_loss(&Matrix::zeros(3, 4), &t, &ALPHA).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariance(values in prop::collection::vec(-3.0f64..3.0, 24), rot in 0usize..6) {
            // build a 6-phone target set by stacking rows with random weights
            let targets = Matrix::from_vec(6, 4, values[..24].iter().map(|v| v * 0.5).collect()).unwrap();
            let weights = Matrix::from_vec(6, 4, values.iter().map(|v| v.abs() + 0.1).collect()).unwrap();
            let pred = Matrix::from_vec(6, 4, values.iter().rev().copied().collect()).unwrap();
            let pt = PhoneTargets { targets, weights, word_index: vec![0; 6] };
            let permute = |m: &Matrix| {
                let rows: Vec<Vec<f64>> = (0..6).map(|r| m.row((r + rot) % 6).to_vec()).collect();
                Matrix::from_rows(&rows).unwrap()
            };
            let pt2 = PhoneTargets { targets: permute(&pt.targets), weights: permute(&pt.weights), word_index: vec![0; 6] };
            let a = weighted_l1_loss(&pred, &pt, &ALPHA).unwrap();
            let b = weighted_l1_loss(&permute(&pred), &pt2, &ALPHA).unwrap();
            prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
    }
}
