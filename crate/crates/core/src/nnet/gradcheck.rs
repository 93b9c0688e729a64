/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate holding `max_rel_error`.
    pub worst_index: Option<usize>,
    /// Coordinates whose gradient magnitude was large enough to compare.
    pub checked: usize,
    pub max_abs_error: f64,
}

/// Gradients smaller than this on both sides are skipped for the relative error.
pub const NEGLIGIBLE_GRADIENT: f64 = 1e-7;

/// Central differences `(f(p + h e_i) - f(p - h e_i)) / 2h` against `analytic`.
///
/// The relative error at `i` is `|a - n| / max(|a|, |n|)`; the maximum is
/// taken over coordinates where `max(|a|, |n|) > NEGLIGIBLE_GRADIENT`.
pub fn finite_diff_check(
    mut loss_fn: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    h: f64,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut theta = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
        max_abs_error: 0.0,
    };
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + h;
        let up = loss_fn(&theta);
        theta[i] = orig - h;
        let down = loss_fn(&theta);
        theta[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let abs_err = (a - numeric).abs();
        report.max_abs_error = report.max_abs_error.max(abs_err);
        let scale = a.abs().max(numeric.abs());
        if scale > NEGLIGIBLE_GRADIENT {
            report.checked += 1;
            let rel = abs_err / scale;
            if rel > report.max_rel_error || report.worst_index.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst_index = Some(i);
            }
        }
    }
    report
}
