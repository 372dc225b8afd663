//! Coefficients and angles solving `Σ_p c_p e^{ijθ_p} = ij` for `|j| ≤ n`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest acceptable residual of the defining system.
pub const RESIDUAL_TOL: f64 = 1e-9;
const IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRule {
    pub n: usize,
    pub angles: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl ShiftRule {
    /// Number of shifted evaluations.
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// `Σ_p |c_p|`
    pub fn coefficient_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c.abs()).sum()
    }

    /// `max_j |Σ_p c_p e^{ijθ_p} − ij|` over `j ∈ [−n, n]`.
    pub fn residual(&self) -> f64 {
        let n = self.n as i64;
        (-n..=n)
            .map(|j| {
                let lhs: Complex64 = self
                    .angles
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(&t, &c)| Complex64::from_polar(c, j as f64 * t))
                    .sum();
                (lhs - Complex64::new(0.0, j as f64)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `Σ_p c_p f(θ_p)` for any function returning a linear quantity.
    pub fn apply<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(usize, f64) -> Result<f64>,
    {
        self.angles
            .iter()
            .zip(&self.coefficients)
            .enumerate()
            .try_fold(0.0, |acc, (p, (&t, &c))| Ok(acc + c * f(p, t)?))
    }
}

/// `P = 2n` shifts at `θ_p = 2πp/(2n+1)` with coefficients from the inverse DFT
/// of `i(0, 1, …, n, −n, …, −1)`. Empty for `n = 0`.
pub fn canonical_shift_rule(n: usize) -> Result<ShiftRule> {
    let size = 2 * n + 1;
    let angles: Vec<f64> = (1..size).map(|p| TAU * p as f64 / size as f64).collect();
    let nn = n as i64;
    let mut coefficients = Vec::with_capacity(2 * n);
    for p in 1..size {
        let c: Complex64 = (-nn..=nn)
            .map(|j| {
                let phase = -TAU * (j * p as i64) as f64 / size as f64;
                Complex64::new(0.0, j as f64) * Complex64::from_polar(1.0, phase)
            })
            .sum::<Complex64>()
            / size as f64;
        if c.im.abs() > IMAG_TOL {
            return Err(Error::ComplexCoefficients { imag: c.im.abs() });
        }
        coefficients.push(c.re);
    }
    Ok(ShiftRule {
        n,
        angles,
        coefficients,
    })
}

/// Minimum-norm coefficients for caller-chosen angles.
pub fn general_shift_rule(n: usize, angles: &[f64]) -> Result<ShiftRule> {
    if n == 0 {
        return Ok(ShiftRule {
            n,
            angles: angles.to_vec(),
            coefficients: vec![0.0; angles.len()],
        });
    }
    if angles.is_empty() {
        return Err(Error::InfeasibleShiftRule { residual: n as f64 });
    }
    let nn = n as i64;
    let rows = 2 * n + 1;
    let a = DMatrix::from_fn(rows, angles.len(), |r, p| {
        Complex64::from_polar(1.0, (r as i64 - nn) as f64 * angles[p])
    });
    let b = DVector::from_fn(rows, |r, _| Complex64::new(0.0, (r as i64 - nn) as f64));
    let c = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let residual = (&a * &c - &b).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > RESIDUAL_TOL {
        return Err(Error::InfeasibleShiftRule { residual });
    }
    // the row set is closed under j → −j, so the minimum-norm solution is real
    let imag = c.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > RESIDUAL_TOL {
        return Err(Error::ComplexCoefficients { imag });
    }
    Ok(ShiftRule {
        n,
        angles: angles.to_vec(),
        coefficients: c.iter().map(|z| z.re).collect(),
    })
}
