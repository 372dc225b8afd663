//! Simultaneous-perturbation gradient estimates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gain sequences `a_k = a/(k+1+A)^α` and `c_k = c/(k+1)^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpsaGains {
    pub a: f64,
    pub c: f64,
    #[serde(rename = "A")]
    pub stability: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl SpsaGains {
    /// `A` at 10% of the iteration budget and `a` chosen so that `a_0 = learning_rate`.
    pub fn for_learning_rate(learning_rate: f64, max_iterations: usize) -> Self {
        let stability = 0.1 * max_iterations as f64;
        let alpha = 0.602;
        SpsaGains {
            a: learning_rate * (1.0 + stability).powf(alpha),
            c: 0.1,
            stability,
            alpha,
            gamma: 0.101,
        }
    }

    pub fn a_k(&self, k: usize) -> f64 {
        self.a / (k as f64 + 1.0 + self.stability).powf(self.alpha)
    }

    pub fn c_k(&self, k: usize) -> f64 {
        self.c / (k as f64 + 1.0).powf(self.gamma)
    }
}

/// `ĝ_i = (L(θ + cΔ) − L(θ − cΔ)) / (2cΔ_i)` for a given perturbation `Δ`.
pub fn spsa_estimate<F>(theta: &[f64], perturbation: &[f64], c: f64, mut loss: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if perturbation.len() != theta.len() {
        return Err(Error::Dimension(format!(
            "perturbation of length {} for {} parameters",
            perturbation.len(),
            theta.len()
        )));
    }
    if perturbation.contains(&0.0) || !(c > 0.0) {
        return Err(Error::InvalidArgument("degenerate perturbation".into()));
    }
    let plus: Vec<f64> = theta.iter().zip(perturbation).map(|(t, d)| t + c * d).collect();
    let minus: Vec<f64> = theta.iter().zip(perturbation).map(|(t, d)| t - c * d).collect();
    let diff = loss(&plus)? - loss(&minus)?;
    Ok(perturbation.iter().map(|d| diff / (2.0 * c * d)).collect())
}

/// One SPSA gradient at iteration `k` with a Rademacher perturbation from `rng`.
pub fn spsa_gradient<F, R>(theta: &[f64], loss: F, k: usize, gains: &SpsaGains, rng: &mut R) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    let perturbation: Vec<f64> = (0..theta.len())
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    spsa_estimate(theta, &perturbation, gains.c_k(k), loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // L(θ) = ½θᵀHθ + bᵀθ
    fn quadratic(theta: &[f64]) -> Result<f64> {
        let h = [[2.0, 0.5, -0.3], [0.5, 1.0, 0.2], [-0.3, 0.2, 3.0]];
        let b = [0.4, -1.0, 0.7];
        let mut v = 0.0;
        for i in 0..3 {
            v += b[i] * theta[i];
            for j in 0..3 {
                v += 0.5 * theta[i] * h[i][j] * theta[j];
            }
        }
        Ok(v)
    }

    fn quadratic_grad(theta: &[f64]) -> Vec<f64> {
        let h = [[2.0, 0.5, -0.3], [0.5, 1.0, 0.2], [-0.3, 0.2, 3.0]];
        let b = [0.4, -1.0, 0.7];
        (0..3)
            .map(|i| b[i] + (0..3).map(|j| h[i][j] * theta[j]).sum::<f64>())
            .collect()
    }

    #[test]
    fn mean_over_sign_vectors_is_exact_for_quadratics() {
        let theta = [0.3, -0.2, 1.1];
        let mut mean = [0.0; 3];
        for signs in 0..8u32 {
            let d: Vec<f64> = (0..3).map(|i| if signs >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let g = spsa_estimate(&theta, &d, 0.1, quadratic).unwrap();
            mean.iter_mut().zip(g).for_each(|(m, x)| *m += x / 8.0);
        }
        for (m, e) in mean.iter().zip(quadratic_grad(&theta)) {
            assert!((m - e).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_minimum_has_zero_mean() {
        let sym = |t: &[f64]| Ok(t.iter().map(|x| x * x).sum::<f64>());
        let mut mean = [0.0; 3];
        for signs in 0..8u32 {
            let d: Vec<f64> = (0..3).map(|i| if signs >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let g = spsa_estimate(&[0.0; 3], &d, 0.2, sym).unwrap();
            mean.iter_mut().zip(g).for_each(|(m, x)| *m += x);
        }
        assert!(mean.iter().all(|m| m.abs() < 1e-15));
    }

    #[test]
    fn deterministic_given_seed() {
        let gains = SpsaGains::for_learning_rate(0.4, 100);
        let a = spsa_gradient(
            &[0.1, 0.2, 0.3],
            quadratic,
            3,
            &gains,
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        let b = spsa_gradient(
            &[0.1, 0.2, 0.3],
            quadratic,
            3,
            &gains,
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gains() {
        let g = SpsaGains::for_learning_rate(0.4, 150);
        assert!((g.a_k(0) - 0.4).abs() < 1e-12);
        assert!((g.c_k(0) - 0.1).abs() < 1e-15);
        assert!(g.a_k(10) < g.a_k(0) && g.c_k(10) < g.c_k(0));
        assert!(spsa_estimate(&[0.0], &[0.0], 0.1, quadratic).is_err());
    }
}
