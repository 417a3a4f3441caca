use ndarray::{Array1, Array2};

use super::network::{backward, forward_batch};
use super::params::PolicyParams;
use crate::Result;

/// Absolute differences below this count as agreement regardless of scale.
pub const GRAD_CHECK_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Parameters whose relative error exceeded the tolerance.
    pub failures: usize,
    pub max_rel_error: f64,
    /// Largest absolute analytic/numeric difference, floor or not.
    pub max_abs_error: f64,
    /// Largest `|a - n| / (|a| + 1e-8)`, the unfloored relative error.
    pub max_shifted_rel_error: f64,
    pub worst_index: usize,
}

fn objective(params: &PolicyParams, states: &Array2<f64>, d_mean: &Array2<f64>, d_value: &Array1<f64>) -> Result<f64> {
    let (out, _) = forward_batch(params, states.view())?;
    Ok((&out.mean * d_mean).sum() + (&out.value * d_value).sum())
}

/// Compares [`backward`] against central differences of
/// `sum(d_mean * mean) + sum(d_value * value)` for every network parameter
/// (the log-std block is skipped). Relative error is
/// `|a - n| / max(|a|, |n|)`, taken as zero when `|a - n| < GRAD_CHECK_FLOOR`.
pub fn gradient_check(
    params: &PolicyParams,
    states: &Array2<f64>,
    d_mean: &Array2<f64>,
    d_value: &Array1<f64>,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (_, cache) = forward_batch(params, states.view())?;
    let analytic = backward(params, &cache, d_mean.view(), d_value.view())?;
    let log_std = params.slot("log_std").range();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        checked: 0,
        failures: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        max_shifted_rel_error: 0.0,
        worst_index: 0,
    };
    for i in 0..params.len() {
        if log_std.contains(&i) {
            continue;
        }
        let orig = probe.values[i];
        probe.values[i] = orig + step;
        let up = objective(&probe, states, d_mean, d_value)?;
        probe.values[i] = orig - step;
        let down = objective(&probe, states, d_mean, d_value)?;
        probe.values[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let diff = (analytic[i] - numeric).abs();
        let rel = if diff < GRAD_CHECK_FLOOR {
            0.0
        } else {
            diff / analytic[i].abs().max(numeric.abs())
        };
        report.checked += 1;
        report.max_abs_error = report.max_abs_error.max(diff);
        report.max_shifted_rel_error = report.max_shifted_rel_error.max(diff / (analytic[i].abs() + 1e-8));
        if rel >= tolerance {
            report.failures += 1;
        }
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    Ok(report)
}
