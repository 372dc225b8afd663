//! Hoeffding sample counts for shift-rule and finite-difference gradient estimators.

use serde::{Deserialize, Serialize};

use super::rule::canonical_shift_rule;
use crate::error::{Error, Result};

/// Samples per evaluation needed to reach additive error `ε` with failure probability `Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingReport {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub failure: f64,
    pub lambda: f64,
    /// `Σ_p |c_p|` of the canonical rule.
    pub coefficient_norm: f64,
    pub n_psr: f64,
    pub n_fd: f64,
    pub ratio: f64,
}

impl HoeffdingReport {
    pub const CSV_HEADER: &'static str = "n,epsilon,delta,failure,lambda,coefficient_norm,n_psr,n_fd,ratio";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n,
            self.epsilon,
            self.delta,
            self.failure,
            self.lambda,
            self.coefficient_norm,
            self.n_psr,
            self.n_fd,
            self.ratio
        )
    }
}

/// `N_FD = −8λ² ln(Λ/2) / (ε²Δ²)` and `N_PSR = −2λ² (Σ|c_p|)² ln(Λ/2) / ε²`.
pub fn hoeffding_report(n: usize, epsilon: f64, delta: f64, failure: f64, lambda: f64) -> Result<HoeffdingReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("photon bound must be at least 1".into()));
    }
    for (name, v) in [("epsilon", epsilon), ("delta", delta), ("lambda", lambda)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    if !(failure > 0.0 && failure < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "failure probability must lie in (0, 1), got {failure}"
        )));
    }
    let s = canonical_shift_rule(n)?.coefficient_norm();
    let log_term = -(failure / 2.0).ln();
    let n_fd = 8.0 * lambda * lambda * log_term / (epsilon * epsilon * delta * delta);
    let n_psr = 2.0 * lambda * lambda * s * s * log_term / (epsilon * epsilon);
    Ok(HoeffdingReport {
        n,
        epsilon,
        delta,
        failure,
        lambda,
        coefficient_norm: s,
        n_psr,
        n_fd,
        ratio: n_fd / n_psr,
    })
}

/// `P(|ĝ − g| > ε) ≤ 2 exp(−ε²N / (2λ²(Σ|c_p|)²))` for a shift-rule estimate with `N` shots per term.
pub fn hoeffding_failure_bound(epsilon: f64, shots: u64, lambda: f64, coefficient_norm: f64) -> f64 {
    let s = lambda * coefficient_norm;
    (2.0 * (-(epsilon * epsilon) * shots as f64 / (2.0 * s * s)).exp()).min(1.0)
}

/// `(Σ|c_p|)²` for `n = 1..=n_max` and the least-squares slope of its log–log plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormScaling {
    pub rows: Vec<(usize, f64)>,
    pub alpha: f64,
}

const MAX_SCALING_N: usize = 200;

pub fn coefficient_norm_scaling(n_max: usize) -> Result<NormScaling> {
    if !(2..=MAX_SCALING_N).contains(&n_max) {
        return Err(Error::InvalidArgument(format!(
            "n_max must lie in 2..={MAX_SCALING_N}, got {n_max}"
        )));
    }
    let rows = (1..=n_max)
        .map(|n| Ok((n, canonical_shift_rule(n)?.coefficient_norm().powi(2))))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, v)| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(NormScaling { rows, alpha: sxy / sxx })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_point() {
        let r = hoeffding_report(4, 0.1, 0.01, 0.1, 1.0).unwrap();
        assert!((r.coefficient_norm - 6.649_655).abs() < 1e-5);
        assert!((r.n_psr - 26_493.0).abs() < 1.0);
        assert!((r.n_fd - 23_965_858.0).abs() < 1.0);
        let independent = 4.0 / (r.coefficient_norm.powi(2) * 0.01f64.powi(2));
        assert!((r.ratio - independent).abs() < 1e-9 * independent);
        assert_eq!(
            HoeffdingReport::CSV_HEADER.split(',').count(),
            r.csv_row().split(',').count()
        );
    }

    #[test]
    fn formula_structure() {
        let a = hoeffding_report(3, 0.1, 0.01, 0.05, 2.0).unwrap();
        let b = hoeffding_report(3, 0.1, 0.02, 0.05, 2.0).unwrap();
        assert!((b.n_fd - a.n_fd / 4.0).abs() < 1e-9 * a.n_fd);
        assert_eq!(a.n_psr, b.n_psr);
        assert!(hoeffding_report(3, 0.1, 0.01, 1.0, 1.0).is_err());
        assert!(hoeffding_report(3, 0.1, 0.01, 0.0, 1.0).is_err());
        assert!(hoeffding_report(0, 0.1, 0.01, 0.1, 1.0).is_err());
        assert!(hoeffding_report(3, -0.1, 0.01, 0.1, 1.0).is_err());
    }

    #[test]
    fn scaling_table() {
        let s = coefficient_norm_scaling(20).unwrap();
        assert!((s.rows[0].1 - 4.0 / 3.0).abs() < 1e-12);
        assert!(s.rows.windows(2).all(|w| w[1].1 > w[0].1));
        // frozen: least squares over n = 1..20
        assert!((s.alpha - 2.520_413).abs() < 1e-5, "{}", s.alpha);
        assert!(coefficient_norm_scaling(1).is_err());
    }

    #[test]
    fn failure_bound_shape() {
        assert_eq!(hoeffding_failure_bound(0.0, 100, 1.0, 1.0), 1.0);
        let lo = hoeffding_failure_bound(0.1, 10_000, 1.0, 2.0);
        let hi = hoeffding_failure_bound(0.1, 1_000, 1.0, 2.0);
        assert!(lo < hi);
    }
}
