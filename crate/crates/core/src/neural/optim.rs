use serde::{Deserialize, Serialize};

use super::params::PolicyParams;
use crate::{Error, Result};

/// Adaptive-moment optimizer state with global-norm gradient clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_grad_norm: f64,
}

impl OptimizerState {
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_grad_norm: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Global norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

/// One clipped adaptive-moment update. A non-finite gradient aborts the
/// step and leaves both the parameters and the optimizer state untouched.
pub fn optimizer_step(
    params: &mut PolicyParams,
    grads: &[f64],
    state: &mut OptimizerState,
) -> Result<StepReport> {
    if grads.len() != params.len() || state.first_moment.len() != params.len() {
        return Err(Error::Shape(format!(
            "{} gradients / {} moments for {} parameters",
            grads.len(),
            state.first_moment.len(),
            params.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient entry {i} is {}", grads[i])));
    }
    let grad_norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    let clipped = grad_norm > state.max_grad_norm;
    let scale = if clipped { state.max_grad_norm / grad_norm } else { 1.0 };

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (((p, &g), m), v) in params
        .values
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        let g = g * scale;
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    params.clamp_log_std();
    Ok(StepReport { grad_norm, clipped })
}
