//! Bosonic Fock basis for `n` photons in `m` modes.
//!
//! Basis states are ordered lexicographically decreasing in their occupation
//! vectors, so for two photons in two modes the order is `|2,0⟩, |1,1⟩, |0,2⟩`.
//! The order is part of every file format produced by this crate.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the squared norm of physical state vectors.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance on unitarity of mode matrices.
pub const UNITARY_TOL: f64 = 1e-10;

/// Desk-scale limits that keep the combinatorics tractable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    pub max_photons: usize,
    pub max_modes: usize,
    /// Largest matrix handed to the permanent kernel.
    pub max_permanent_dim: usize,
    /// Largest basis for which dense Fock-space matrices are built.
    pub max_dense_states: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_photons: 6,
            max_modes: 14,
            max_permanent_dim: 12,
            max_dense_states: 2000,
        }
    }
}

/// Occupation-number vector `|s_1, ..., s_m⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FockState(Vec<usize>);

impl FockState {
    pub fn new(occupations: Vec<usize>) -> Self {
        FockState(occupations)
    }

    pub fn vacuum(modes: usize) -> Self {
        FockState(vec![0; modes])
    }

    pub fn occupations(&self) -> &[usize] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn photons(&self) -> usize {
        self.0.iter().sum()
    }

    /// Photons in mode `k`, i.e. the eigenvalue of the number operator on this state.
    pub fn photons_in_mode(&self, k: usize) -> Result<usize> {
        self.0.get(k).copied().ok_or(Error::ModeOutOfRange {
            mode: k,
            modes: self.0.len(),
        })
    }

    /// `∏ s_i!`
    pub fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&s| factorial(s)).product()
    }

    /// Mode index of every photon, with multiplicity: `|0,2,1⟩ -> [1, 1, 2]`.
    pub fn mode_list(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(mode, &count)| std::iter::repeat_n(mode, count))
            .collect()
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "⟩")
    }
}

impl From<Vec<usize>> for FockState {
    fn from(v: Vec<usize>) -> Self {
        FockState(v)
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Ordered enumeration of all `n`-photon states on `m` modes, with its inverse index.
#[derive(Debug, Clone)]
pub struct FockBasis {
    photons: usize,
    modes: usize,
    states: Vec<FockState>,
    index: HashMap<FockState, usize>,
}

impl FockBasis {
    /// Enumerates the basis with the default caps.
    pub fn new(photons: usize, modes: usize) -> Result<Self> {
        Self::with_caps(photons, modes, &Caps::default())
    }

    pub fn with_caps(photons: usize, modes: usize, caps: &Caps) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidArgument("at least one mode is required".into()));
        }
        if photons > caps.max_photons {
            return Err(Error::CapExceeded {
                what: "photons",
                value: photons,
                cap: caps.max_photons,
            });
        }
        if modes > caps.max_modes {
            return Err(Error::CapExceeded {
                what: "modes",
                value: modes,
                cap: caps.max_modes,
            });
        }
        let mut states = Vec::with_capacity(binomial(photons + modes - 1, photons));
        let mut current = vec![0; modes];
        enumerate_into(photons, 0, &mut current, &mut states);
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(FockBasis {
            photons,
            modes,
            states,
            index,
        })
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state(&self, position: usize) -> &FockState {
        &self.states[position]
    }

    pub fn index_of(&self, state: &FockState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Occupation of mode `k` for every basis state, i.e. the diagonal of `n̂_k`.
    pub fn mode_occupations(&self, k: usize) -> Result<Vec<usize>> {
        if k >= self.modes {
            return Err(Error::ModeOutOfRange {
                mode: k,
                modes: self.modes,
            });
        }
        Ok(self.states.iter().map(|s| s.occupations()[k]).collect())
    }
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.photons == other.photons && self.modes == other.modes
    }
}

fn enumerate_into(remaining: usize, mode: usize, current: &mut [usize], out: &mut Vec<FockState>) {
    if mode + 1 == current.len() {
        current[mode] = remaining;
        out.push(FockState(current.to_vec()));
        return;
    }
    for k in (0..=remaining).rev() {
        current[mode] = k;
        enumerate_into(remaining - k, mode + 1, current, out);
    }
    current[mode] = 0;
}

/// Amplitudes over a shared Fock basis.
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<FockBasis>,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(basis: Arc<FockBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a basis of {} states",
                amplitudes.len(),
                basis.len()
            )));
        }
        Ok(StateVector { basis, amplitudes })
    }

    /// The basis vector `|state⟩`.
    pub fn basis_state(basis: Arc<FockBasis>, state: &FockState) -> Result<Self> {
        if state.modes() != basis.modes() {
            return Err(Error::ModeMismatch {
                expected: basis.modes(),
                got: state.modes(),
            });
        }
        let position = basis.index_of(state).ok_or(Error::PhotonMismatch {
            expected: basis.photons(),
            got: state.photons(),
        })?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.len()];
        amplitudes[position] = Complex64::new(1.0, 0.0);
        Ok(StateVector { basis, amplitudes })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < NORM_TOL
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Applies `exp(iθ n̂_k)`, which is diagonal in the occupation basis.
    pub fn apply_phase(&self, k: usize, theta: f64) -> Result<StateVector> {
        let occupations = self.basis.mode_occupations(k)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .zip(occupations)
            .map(|(a, n)| a * Complex64::from_polar(1.0, n as f64 * theta))
            .collect();
        Ok(StateVector {
            basis: Arc::clone(&self.basis),
            amplitudes,
        })
    }

    /// `⟨ψ|n̂_k|ψ⟩`
    pub fn mean_photons(&self, k: usize) -> Result<f64> {
        let occupations = self.basis.mode_occupations(k)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(occupations)
            .map(|(a, n)| a.norm_sqr() * n as f64)
            .sum())
    }
}
