//! Matrix permanent via Glynn's formula walked in Gray-code order.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default largest dimension accepted by [`permanent`].
pub const DEFAULT_MAX_DIM: usize = 12;

/// Permanent of a square complex matrix in `O(d·2^d)`.
pub fn permanent(a: &DMatrix<Complex64>) -> Result<Complex64> {
    permanent_capped(a, DEFAULT_MAX_DIM)
}

pub fn permanent_capped(a: &DMatrix<Complex64>, max_dim: usize) -> Result<Complex64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "permanent of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() > max_dim {
        return Err(Error::CapExceeded {
            what: "permanent dimension",
            value: a.nrows(),
            cap: max_dim,
        });
    }
    Ok(glynn_gray(a))
}

/// Glynn: `perm(A) = 2^{1-d} Σ_δ (∏ δ_k) ∏_j Σ_i δ_i a_ij` over `δ ∈ {±1}^d`, `δ_0 = +1`.
/// Consecutive sign vectors differ in one entry, so the column sums update in `O(d)`.
pub(crate) fn glynn_gray(a: &DMatrix<Complex64>) -> Complex64 {
    let d = a.nrows();
    match d {
        0 => return Complex64::new(1.0, 0.0),
        1 => return a[(0, 0)],
        2 => return a[(0, 0)] * a[(1, 1)] + a[(0, 1)] * a[(1, 0)],
        _ => {}
    }

    let mut sums: Vec<Complex64> = (0..d).map(|j| a.column(j).iter().sum()).collect();
    let mut delta = vec![1.0f64; d];
    let mut sign = 1.0f64;
    let mut total: Complex64 = sums.iter().product();

    let steps = 1u64 << (d - 1);
    for g in 1..steps {
        // the bit flipped between Gray codes g-1 and g is the lowest set bit of g
        let row = g.trailing_zeros() as usize + 1;
        let factor = 2.0 * delta[row];
        for (j, s) in sums.iter_mut().enumerate() {
            *s -= a[(row, j)] * factor;
        }
        delta[row] = -delta[row];
        sign = -sign;
        let prod: Complex64 = sums.iter().product();
        total += prod * sign;
    }
    total / steps as f64
}
