//! Built-in circuits for the variational experiments.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockState};
use crate::interferometer::{BoundComponent, Component, ParamCircuit};

/// `cos η = 1/√3`: two photons meeting here stay put with amplitude
/// `cos²η − sin²η = −1/3`, a lone photon with `1/√3`.
pub fn cz_eta() -> f64 {
    (1.0 / 3f64.sqrt()).acos()
}

/// Qubits encoded by which mode of a pair holds their photon.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRail {
    pub modes: usize,
    /// `(rail for |0⟩, rail for |1⟩)` per qubit.
    pub pairs: Vec<(usize, usize)>,
}

impl DualRail {
    pub fn new(modes: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = vec![false; modes];
        for &(a, b) in &pairs {
            for k in [a, b] {
                if k >= modes {
                    return Err(Error::ModeOutOfRange { mode: k, modes });
                }
                if std::mem::replace(&mut seen[k], true) {
                    return Err(Error::InvalidArgument(format!("mode {k} used by two rails")));
                }
            }
        }
        Ok(DualRail { modes, pairs })
    }

    pub fn qubits(&self) -> usize {
        self.pairs.len()
    }

    /// Logical bits of `state`, or `None` outside the code space
    /// (a pair without exactly one photon, or a photon outside every pair).
    pub fn decode(&self, state: &FockState) -> Option<Vec<u8>> {
        let occ = state.occupations();
        let mut bits = Vec::with_capacity(self.pairs.len());
        for &(a, b) in &self.pairs {
            match (occ[a], occ[b]) {
                (1, 0) => bits.push(0),
                (0, 1) => bits.push(1),
                _ => return None,
            }
        }
        let in_pairs: usize = self.pairs.iter().map(|&(a, b)| occ[a] + occ[b]).sum();
        (in_pairs == state.photons()).then_some(bits)
    }

    /// `|bits⟩` as a Fock state.
    pub fn encode(&self, bits: &[u8]) -> FockState {
        let mut occ = vec![0; self.modes];
        for (&(a, b), &bit) in self.pairs.iter().zip(bits) {
            occ[if bit == 0 { a } else { b }] = 1;
        }
        FockState::new(occ)
    }

    pub fn keep_mask(&self, basis: &FockBasis) -> Vec<bool> {
        basis.states().iter().map(|s| self.decode(s).is_some()).collect()
    }

    /// Rotation that maps the eigenbasis of `pauli` on `qubit` onto the rails.
    /// `Z` and `I` need none.
    pub fn rotation(&self, qubit: usize, pauli: char) -> Vec<BoundComponent> {
        let (r0, r1) = self.pairs[qubit];
        let bs50 = BoundComponent::BeamSplitter {
            modes: (r0, r1),
            eta: std::f64::consts::FRAC_PI_4,
        };
        let phase = |theta| BoundComponent::PhaseShifter { mode: r1, theta };
        match pauli {
            'X' => vec![phase(-FRAC_PI_2), bs50],
            'Y' => vec![phase(PI), bs50],
            _ => Vec::new(),
        }
    }
}

/// Two dual-rail qubits, rails `(0,1)` and `(2,3)`, ancillas `4` and `5`.
/// Each qubit gets `BS·PS·BS·PS` before and after a post-selected CZ; 8 parameters.
pub fn vqe_ansatz() -> (ParamCircuit, FockState, DualRail) {
    let pairs = [(0, 1), (2, 3)];
    let mut components = Vec::new();
    let layer = |stage: &str, components: &mut Vec<Component>| {
        for (q, &(a, b)) in pairs.iter().enumerate() {
            components.push(Component::bs50(a, b));
            components.push(Component::ps(a, format!("{stage}_q{q}_a")));
            components.push(Component::bs50(a, b));
            components.push(Component::ps(a, format!("{stage}_q{q}_b")));
        }
    };
    layer("pre", &mut components);
    let eta = cz_eta();
    components.push(Component::bs(1, 3, eta));
    components.push(Component::bs(0, 4, eta));
    components.push(Component::bs(2, 5, eta));
    layer("post", &mut components);
    let circuit = ParamCircuit::new(6, components).expect("valid ansatz");
    let rails = DualRail::new(6, pairs.to_vec()).expect("valid rails");
    (circuit, rails.encode(&[0, 0]), rails)
}

/// Rectangular mesh on 8 modes: 8 columns alternating 4 and 3 beam splitters,
/// each preceded by a phase shifter on its upper mode; 28 parameters. Input `|1,1,1,0,0,0,0,0⟩`.
pub fn qcbm_ansatz() -> (ParamCircuit, FockState) {
    let modes = 8;
    let mut components = Vec::new();
    let mut count = 0;
    for column in 0..8 {
        let start = column % 2;
        for top in (start..modes - 1).step_by(2) {
            components.push(Component::ps(top, format!("p{count}")));
            components.push(Component::bs50(top, top + 1));
            count += 1;
        }
    }
    let circuit = ParamCircuit::new(modes, components).expect("valid mesh");
    (circuit, FockState::new(vec![1, 1, 1, 0, 0, 0, 0, 0]))
}

/// Equal-or-weighted Gaussian bumps over outcome indices, normalized.
pub fn gaussian_mixture(len: usize, means: &[f64], sigma: f64, weights: &[f64]) -> Result<Vec<f64>> {
    if means.is_empty() || means.len() != weights.len() {
        return Err(Error::InvalidArgument("need one weight per mean".into()));
    }
    if !(sigma > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidArgument("sigma and weights must be positive".into()));
    }
    let raw: Vec<f64> = (0..len)
        .map(|x| {
            means
                .iter()
                .zip(weights)
                .map(|(m, w)| w * (-(x as f64 - m).powi(2) / (2.0 * sigma * sigma)).exp())
                .sum()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidDistribution("mixture has no mass".into()));
    }
    Ok(raw.into_iter().map(|v| v / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::{evolve_fock_state, BoundCircuit};
    use nalgebra::Matrix2;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pauli(p: char) -> Matrix2<Complex64> {
        let (o, z, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::i());
        match p {
            'X' => Matrix2::new(z, o, o, z),
            'Y' => Matrix2::new(z, -i, i, z),
            'Z' => Matrix2::new(o, z, z, -o),
            _ => Matrix2::identity(),
        }
    }

    #[test]
    fn rotations_diagonalize_paulis() {
        let rails = DualRail::new(2, vec![(0, 1)]).unwrap();
        for p in ['X', 'Y', 'Z'] {
            let u = BoundCircuit::new(2, rails.rotation(0, p)).unitary().matrix().clone();
            let v = Matrix2::new(u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
            let back = v.adjoint() * pauli('Z') * v;
            assert!((back - pauli(p)).norm() < 1e-12, "{p}");
        }
    }

    #[test]
    fn vqe_ansatz_shape() {
        let (circuit, input, rails) = vqe_ansatz();
        assert_eq!(circuit.num_parameters(), 8);
        assert_eq!(input, FockState::new(vec![1, 0, 1, 0, 0, 0]));
        assert_eq!(rails.decode(&input), Some(vec![0, 0]));
        assert_eq!(rails.decode(&FockState::new(vec![1, 0, 0, 0, 1, 0])), None);
        assert_eq!(rails.decode(&FockState::new(vec![2, 0, 0, 0, 0, 0])), None);
    }

    #[test]
    fn cz_stage_succeeds_with_one_ninth() {
        // every logical input keeps norm² 1/9 and |11⟩ alone flips sign
        let eta = cz_eta();
        let cz = BoundCircuit::new(
            6,
            vec![
                BoundComponent::BeamSplitter { modes: (1, 3), eta },
                BoundComponent::BeamSplitter { modes: (0, 4), eta },
                BoundComponent::BeamSplitter { modes: (2, 5), eta },
            ],
        )
        .unitary();
        let rails = DualRail::new(6, vec![(0, 1), (2, 3)]).unwrap();
        let basis = FockBasis::new(2, 6).unwrap();
        for (bits, sign) in [([0, 0], 1.0), ([0, 1], 1.0), ([1, 0], 1.0), ([1, 1], -1.0)] {
            let input = rails.encode(&bits);
            let out = evolve_fock_state(&cz, &basis, &input).unwrap();
            let idx = basis.index_of(&input).unwrap();
            assert!((out[idx] - Complex64::new(sign / 3.0, 0.0)).norm() < 1e-12, "{bits:?}");
            for (j, s) in basis.states().iter().enumerate() {
                if j != idx && rails.decode(s).is_some() {
                    assert!(out[j].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn post_selection_rate_is_parameter_free() {
        let (circuit, input, rails) = vqe_ansatz();
        let basis = FockBasis::new(2, 6).unwrap();
        let keep = rails.keep_mask(&basis);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let theta: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            let p = crate::interferometer::output_distribution(&circuit, &theta, &input).unwrap();
            let kept: f64 = p.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| p).sum();
            assert!((kept - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qcbm_ansatz_shape() {
        let (circuit, input) = qcbm_ansatz();
        assert_eq!(circuit.num_parameters(), 28);
        assert_eq!(input.photons(), 3);
        assert_eq!(FockBasis::new(3, 8).unwrap().len(), 120);
        let bs = circuit
            .components()
            .iter()
            .filter(|c| matches!(c, Component::BeamSplitter { .. }))
            .count();
        assert_eq!(bs, 28);
    }

    #[test]
    fn mixture_target() {
        let t = gaussian_mixture(120, &[30.0, 80.0], 8.0, &[0.5, 0.5]).unwrap();
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(t.iter().all(|&x| x > 0.0));
        let peak = (0..120).max_by(|&a, &b| t[a].total_cmp(&t[b])).unwrap();
        assert!(peak == 30 || peak == 80);
        assert!((t[30] - t[80]).abs() < 1e-6);
        assert!(gaussian_mixture(10, &[1.0], 0.0, &[1.0]).is_err());
    }
}
