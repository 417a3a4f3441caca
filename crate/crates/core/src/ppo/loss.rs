/// `min(r A, clip(r, 1 - eps, 1 + eps) A)` for a given probability ratio.
pub fn clipped_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Per-sample clipped surrogate from new and old log-probabilities.
pub fn ppo_surrogate(log_prob_new: f64, log_prob_old: f64, advantage: f64, epsilon: f64) -> f64 {
    clipped_objective((log_prob_new - log_prob_old).exp(), advantage, epsilon)
}

/// Batch mean of squared value errors.
pub fn value_loss(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len(), "value_loss: length mismatch");
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}

/// Maximized objective `surrogate - c1 value_loss + c2 entropy`.
pub fn total_loss(surrogate: f64, value_loss: f64, entropy: f64, c1: f64, c2: f64) -> f64 {
    surrogate - c1 * value_loss + c2 * entropy
}
