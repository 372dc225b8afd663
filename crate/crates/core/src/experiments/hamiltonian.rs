//! Weighted Pauli-string Hamiltonians and their measurement on dual-rail qubits.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ansatz::DualRail;
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::sampling::{MeasuredTerm, Observable};

/// `coefficient · P_0 ⊗ P_1 ⊗ …`, character `q` of `pauli` acting on qubit `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub pauli: String,
}

impl PauliTerm {
    pub fn new(coefficient: f64, pauli: &str) -> Self {
        PauliTerm {
            coefficient,
            pauli: pauli.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliHamiltonian {
    qubits: usize,
    terms: Vec<PauliTerm>,
}

/// One measurement setting: a basis per qubit and the terms it resolves.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGroup {
    pub bases: Vec<char>,
    pub terms: Vec<PauliTerm>,
}

impl PauliHamiltonian {
    pub fn new(terms: Vec<PauliTerm>) -> Result<Self> {
        let qubits = terms
            .first()
            .map(|t| t.pauli.chars().count())
            .ok_or_else(|| Error::InvalidArgument("empty Hamiltonian".into()))?;
        for t in &terms {
            if t.pauli.chars().count() != qubits || t.pauli.chars().any(|c| !"IXYZ".contains(c)) {
                return Err(Error::InvalidArgument(format!("bad Pauli string {:?}", t.pauli)));
            }
            if !t.coefficient.is_finite() {
                return Err(Error::InvalidArgument(format!("coefficient of {}", t.pauli)));
            }
        }
        Ok(PauliHamiltonian { qubits, terms })
    }

    /// Two-qubit H₂ at 0.735 Å after parity reduction.
    pub fn h2() -> Self {
        PauliHamiltonian::new(default_h2_terms()).expect("valid terms")
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn dense(&self) -> DMatrix<Complex64> {
        let dim = 1 << self.qubits;
        let mut total = DMatrix::<Complex64>::zeros(dim, dim);
        for t in &self.terms {
            let mut m = DMatrix::<Complex64>::identity(1, 1);
            for p in t.pauli.chars() {
                m = m.kronecker(&pauli_matrix(p));
            }
            total += m * Complex64::new(t.coefficient, 0.0);
        }
        total
    }

    /// Smallest eigenvalue of the dense matrix.
    pub fn ground_energy(&self) -> f64 {
        SymmetricEigen::new(self.dense())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Greedy grouping of qubit-wise compatible terms, in order of first appearance.
    pub fn groups(&self) -> Vec<MeasurementGroup> {
        let mut groups: Vec<MeasurementGroup> = Vec::new();
        for t in &self.terms {
            let chars: Vec<char> = t.pauli.chars().collect();
            let fits = |g: &MeasurementGroup| {
                g.bases
                    .iter()
                    .zip(&chars)
                    .all(|(&b, &c)| b == 'I' || c == 'I' || b == c)
            };
            match groups.iter_mut().find(|g| fits(g)) {
                Some(g) => {
                    for (b, &c) in g.bases.iter_mut().zip(&chars) {
                        if *b == 'I' {
                            *b = c;
                        }
                    }
                    g.terms.push(t.clone());
                }
                None => groups.push(MeasurementGroup {
                    bases: chars,
                    terms: vec![t.clone()],
                }),
            }
        }
        groups
    }

    /// One post-selected measured term per group: rotate each qubit into its
    /// basis, keep outcomes in the code space, and score the logical bits.
    pub fn observable(&self, rails: &DualRail, basis: &FockBasis) -> Result<Observable> {
        if rails.qubits() != self.qubits {
            return Err(Error::InvalidArgument(format!(
                "{}-qubit Hamiltonian on {} dual-rail qubits",
                self.qubits,
                rails.qubits()
            )));
        }
        let keep = rails.keep_mask(basis);
        let terms = self
            .groups()
            .into_iter()
            .map(|g| {
                let rotation = g
                    .bases
                    .iter()
                    .enumerate()
                    .flat_map(|(q, &b)| rails.rotation(q, b))
                    .collect();
                let values = basis
                    .states()
                    .iter()
                    .map(|s| match rails.decode(s) {
                        Some(bits) => g.terms.iter().map(|t| t.coefficient * parity(&t.pauli, &bits)).sum(),
                        None => 0.0,
                    })
                    .collect();
                MeasuredTerm {
                    rotation,
                    values,
                    keep: Some(keep.clone()),
                }
            })
            .collect();
        Ok(Observable::Measured(terms))
    }
}

/// Eigenvalue `±1` of a Pauli string on a computational-basis outcome (after rotation).
fn parity(pauli: &str, bits: &[u8]) -> f64 {
    let flips = pauli.chars().zip(bits).filter(|(p, &b)| *p != 'I' && b == 1).count();
    if flips % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn pauli_matrix(p: char) -> DMatrix<Complex64> {
    let (o, z, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::i());
    let entries = match p {
        'X' => [z, o, o, z],
        'Y' => [z, -i, i, z],
        'Z' => [o, z, z, -o],
        _ => [o, z, z, o],
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

pub fn default_h2_terms() -> Vec<PauliTerm> {
    vec![
        PauliTerm::new(-1.052_373_2, "II"),
        PauliTerm::new(0.397_937_42, "IZ"),
        PauliTerm::new(-0.397_937_42, "ZI"),
        PauliTerm::new(-0.011_280_1, "ZZ"),
        PauliTerm::new(0.180_931_19, "XX"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ansatz::vqe_ansatz;
    use crate::interferometer::evolve_fock_state;
    use crate::sampling::{estimate_expectation, NoiseModel};
    use crate::shift_rules::{ExpectationProblem, FiniteDifference};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn h2_ground_energy() {
        // frozen from a dense 4×4 diagonalization
        assert!((PauliHamiltonian::h2().ground_energy() + 1.857_274_977).abs() < 1e-8);
    }

    #[test]
    fn grouping() {
        let h = PauliHamiltonian::h2();
        let groups = h.groups();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].bases, vec!['Z', 'Z']);
        assert_eq!(groups[0].terms.len(), 4);
        assert_eq!(groups[1].bases, vec!['X', 'X']);
        let mixed = PauliHamiltonian::new(vec![
            PauliTerm::new(1.0, "XI"),
            PauliTerm::new(1.0, "IY"),
            PauliTerm::new(1.0, "ZI"),
        ])
        .unwrap();
        assert_eq!(mixed.groups().len(), 2);
        assert!(PauliHamiltonian::new(vec![PauliTerm::new(1.0, "XQ")]).is_err());
        assert!(PauliHamiltonian::new(vec![PauliTerm::new(1.0, "X"), PauliTerm::new(1.0, "XX")]).is_err());
    }

    /// Logical two-qubit state from the Fock amplitudes on the code space, renormalized.
    fn logical_state(theta: &[f64]) -> DVector<Complex64> {
        let (circuit, input, rails) = vqe_ansatz();
        let basis = FockBasis::new(2, 6).unwrap();
        let amps = evolve_fock_state(&circuit.bind(theta).unwrap().unitary(), &basis, &input).unwrap();
        let mut psi = DVector::zeros(4);
        for (s, a) in basis.states().iter().zip(amps) {
            if let Some(bits) = rails.decode(s) {
                psi[(bits[0] * 2 + bits[1]) as usize] = a;
            }
        }
        let norm = psi.norm();
        psi / Complex64::new(norm, 0.0)
    }

    #[test]
    fn measured_energy_matches_logical_expectation() {
        let h = PauliHamiltonian::new(vec![
            PauliTerm::new(-0.3, "II"),
            PauliTerm::new(0.7, "ZI"),
            PauliTerm::new(0.2, "XY"),
            PauliTerm::new(-0.5, "YZ"),
            PauliTerm::new(0.4, "XX"),
        ])
        .unwrap();
        let (circuit, input, rails) = vqe_ansatz();
        let basis = FockBasis::new(2, 6).unwrap();
        let obs = h.observable(&rails, &basis).unwrap();
        let dense = h.dense();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let theta: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            let psi = logical_state(&theta);
            let expected = (psi.adjoint() * &dense * &psi)[(0, 0)].re;
            let got = estimate_expectation(&circuit, &theta, &input, &obs, &NoiseModel::exact()).unwrap();
            assert!((got.value - expected).abs() < 1e-10, "{} vs {expected}", got.value);
        }
    }

    #[test]
    fn post_selected_energy_obeys_shift_rule() {
        let (circuit, input, rails) = vqe_ansatz();
        let basis = FockBasis::new(2, 6).unwrap();
        let obs = PauliHamiltonian::h2().observable(&rails, &basis).unwrap();
        let problem = ExpectationProblem::new(&circuit, &input, &obs).unwrap();
        let theta: Vec<f64> = (0..8).map(|i| 0.4 + 0.9 * i as f64).collect();
        for name in circuit.parameters() {
            let psr = problem.psr_gradient(&theta, name, &NoiseModel::exact(), true).unwrap();
            let fd = problem
                .fd_gradient(&theta, name, FiniteDifference::central(1e-6), &NoiseModel::exact())
                .unwrap();
            assert!(
                (psr.value - fd.value).abs() < 1e-6,
                "{name}: {} vs {}",
                psr.value,
                fd.value
            );
        }
    }

    #[test]
    fn identity_hamiltonian_is_constant() {
        let h = PauliHamiltonian::new(vec![PauliTerm::new(1.0, "II")]).unwrap();
        let (circuit, input, rails) = vqe_ansatz();
        let basis = FockBasis::new(2, 6).unwrap();
        let obs = h.observable(&rails, &basis).unwrap();
        for seed in 0..5 {
            let theta: Vec<f64> = (0..8).map(|i| seed as f64 + i as f64).collect();
            let e = estimate_expectation(&circuit, &theta, &input, &obs, &NoiseModel::sampled(200, 0.9, seed)).unwrap();
            assert_eq!(e.value, 1.0);
        }
    }
}
