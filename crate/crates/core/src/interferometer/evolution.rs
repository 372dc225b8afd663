//! Mode unitaries and their lift to the Fock space.
//!
//! For a mode unitary `U`, the transition amplitude from input `|s⟩` to output
//! `|t⟩` is `perm(U[t,s]) / sqrt(∏ t_i! ∏ s_j!)`, where `U[t,s]` repeats row `i`
//! of `U` `t_i` times and column `j` `s_j` times.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::circuit::{unitarity_deviation, BoundCircuit, ParamCircuit};
use super::permanent::{glynn_gray, DEFAULT_MAX_DIM};
use crate::error::{Error, Result};
use crate::fock::{Caps, FockBasis, FockState, StateVector, UNITARY_TOL};

/// Bases at or below this size are evolved on the calling thread.
const PARALLEL_THRESHOLD: usize = 256;

/// `m×m` unitary acting on mode creation operators: `a_j† ↦ Σ_i U_ij a_i†`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary(DMatrix<Complex64>);

impl ModeUnitary {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension(format!(
                "mode unitary must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(ModeUnitary(matrix))
    }

    pub fn identity(modes: usize) -> Self {
        ModeUnitary(DMatrix::identity(modes, modes))
    }

    pub fn modes(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    /// `self · other` (apply `other` first).
    pub fn compose(&self, other: &ModeUnitary) -> ModeUnitary {
        ModeUnitary(&self.0 * &other.0)
    }

    pub fn adjoint(&self) -> ModeUnitary {
        ModeUnitary(self.0.adjoint())
    }
}

impl BoundCircuit {
    /// Product of component matrices, first component rightmost.
    pub fn unitary(&self) -> ModeUnitary {
        let mut u = DMatrix::identity(self.modes(), self.modes());
        for c in self.components() {
            c.apply_left(&mut u);
        }
        ModeUnitary(u)
    }
}

pub fn compose_unitary(circuit: &ParamCircuit, theta: &[f64]) -> Result<ModeUnitary> {
    Ok(circuit.bind(theta)?.unitary())
}

fn transition_amplitude(u: &DMatrix<Complex64>, rows: &[usize], cols: &[usize]) -> Complex64 {
    let d = rows.len();
    let sub = DMatrix::from_fn(d, d, |r, c| u[(rows[r], cols[c])]);
    glynn_gray(&sub)
}

fn check_photons(n: usize) -> Result<()> {
    if n > DEFAULT_MAX_DIM {
        return Err(Error::CapExceeded {
            what: "permanent dimension",
            value: n,
            cap: DEFAULT_MAX_DIM,
        });
    }
    Ok(())
}

/// Output amplitudes over `basis` for the single input `|input⟩`.
pub fn evolve_fock_state(u: &ModeUnitary, basis: &FockBasis, input: &FockState) -> Result<Vec<Complex64>> {
    if u.modes() != basis.modes() || input.modes() != basis.modes() {
        return Err(Error::ModeMismatch {
            expected: basis.modes(),
            got: if u.modes() != basis.modes() {
                u.modes()
            } else {
                input.modes()
            },
        });
    }
    if input.photons() != basis.photons() {
        return Err(Error::PhotonMismatch {
            expected: basis.photons(),
            got: input.photons(),
        });
    }
    check_photons(basis.photons())?;
    let cols = input.mode_list();
    let in_norm = input.factorial_product();
    let amplitude = |t: &FockState| {
        let rows = t.mode_list();
        transition_amplitude(u.matrix(), &rows, &cols) / (t.factorial_product() * in_norm).sqrt()
    };
    Ok(if basis.len() > PARALLEL_THRESHOLD {
        basis.states().par_iter().map(amplitude).collect()
    } else {
        basis.states().iter().map(amplitude).collect()
    })
}

/// Applies the Fock-space lift of `u` to `psi`.
pub fn fock_evolve(u: &ModeUnitary, psi: &StateVector) -> Result<StateVector> {
    let basis = psi.basis();
    if u.modes() != basis.modes() {
        return Err(Error::ModeMismatch {
            expected: basis.modes(),
            got: u.modes(),
        });
    }
    check_photons(basis.photons())?;
    let inputs: Vec<(Vec<usize>, f64, Complex64)> = basis
        .states()
        .iter()
        .zip(psi.amplitudes())
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(s, a)| (s.mode_list(), s.factorial_product(), *a))
        .collect();
    let amplitude = |t: &FockState| -> Complex64 {
        let rows = t.mode_list();
        let t_norm = t.factorial_product();
        inputs
            .iter()
            .map(|(cols, s_norm, a)| a * transition_amplitude(u.matrix(), &rows, cols) / (t_norm * s_norm).sqrt())
            .sum()
    };
    let amplitudes = if basis.len() > PARALLEL_THRESHOLD {
        basis.states().par_iter().map(amplitude).collect()
    } else {
        basis.states().iter().map(amplitude).collect()
    };
    StateVector::new(Arc::clone(basis), amplitudes)
}

/// Dense Fock-space matrix of `u` on `basis`.
pub fn fock_matrix(u: &ModeUnitary, basis: &FockBasis, caps: &Caps) -> Result<DMatrix<Complex64>> {
    if basis.len() > caps.max_dense_states {
        return Err(Error::CapExceeded {
            what: "dense basis size",
            value: basis.len(),
            cap: caps.max_dense_states,
        });
    }
    let columns = basis
        .states()
        .iter()
        .map(|s| evolve_fock_state(u, basis, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(basis.len(), basis.len(), |r, c| columns[c][r]))
}

/// Outcome probabilities over the canonical basis for a Fock input.
pub fn output_distribution(circuit: &ParamCircuit, theta: &[f64], input: &FockState) -> Result<Vec<f64>> {
    let bound = circuit.bind(theta)?;
    let basis = FockBasis::new(input.photons(), circuit.modes())?;
    bound_distribution(&bound, &basis, input)
}

fn bound_distribution(bound: &BoundCircuit, basis: &FockBasis, input: &FockState) -> Result<Vec<f64>> {
    let amps = evolve_fock_state(&bound.unitary(), basis, input)?;
    Ok(amps.iter().map(|a| a.norm_sqr()).collect())
}
