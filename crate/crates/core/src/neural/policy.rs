use std::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::StandardNormal;

/// One action drawn from the diagonal Gaussian policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample {
    /// Pre-clamp sample; log-probabilities are evaluated on this.
    pub raw: Vec<f64>,
    /// Sample clamped to [-1, 1] per component, as sent to the environment.
    pub action: Vec<f64>,
    pub log_prob: f64,
}

/// log N(action; mean, exp(log_std)) summed over components.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

pub fn gaussian_policy<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> ActionSample {
    let raw: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let z: f64 = rng.sample(StandardNormal);
            m + ls.exp() * z
        })
        .collect();
    let log_prob = gaussian_log_prob(&raw, mean, log_std);
    let action = raw.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
    ActionSample {
        raw,
        action,
        log_prob,
    }
}

/// Entropy of the diagonal Gaussian, `sum(log_std + 0.5 ln(2 pi e))`.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (2.0 * PI * E).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tiny_sigma_stays_near_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mean = [0.3, -0.2];
        let near = (0..10_000)
            .filter(|_| {
                let s = gaussian_policy(&mean, &[-5.0, -5.0], &mut rng);
                s.action.iter().zip(&mean).all(|(a, m)| (a - m).abs() < 0.1)
            })
            .count();
        assert!(near as f64 / 10_000.0 > 0.999);
    }

    #[test]
    fn log_prob_at_mean() {
        let ls = [0.3, -1.2];
        let lp = gaussian_log_prob(&[0.1, 0.2], &[0.1, 0.2], &ls);
        let want = -ls.iter().map(|l| l + 0.5 * (2.0 * PI).ln()).sum::<f64>();
        assert!((lp - want).abs() < 1e-14);
    }

    #[test]
    fn sample_std_matches_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ls = 0.5f64.ln();
        let xs: Vec<f64> = (0..100_000)
            .map(|_| gaussian_policy(&[0.0], &[ls], &mut rng).raw[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var.sqrt() - 0.5).abs() < 0.01);
    }

    #[test]
    fn actions_are_clamped_but_log_prob_is_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = gaussian_policy(&[0.9, -0.9], &[1.0, 1.0], &mut rng);
            assert!(s.action.iter().all(|a| (-1.0..=1.0).contains(a)));
            assert_eq!(s.log_prob, gaussian_log_prob(&s.raw, &[0.9, -0.9], &[1.0, 1.0]));
        }
    }

    #[test]
    fn entropy_properties() {
        assert!((entropy(&[0.0, 0.0]) - 2.837_877_066_409_345_5).abs() < 1e-12);
        assert!(entropy(&[0.1, 0.0]) > entropy(&[0.0, 0.0]));
        let base = [0.2, -0.4];
        let shifted = [0.2 + 0.7, -0.4 + 0.7];
        assert!((entropy(&shifted) - entropy(&base) - 1.4).abs() < 1e-12);
    }
}
