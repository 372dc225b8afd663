//! Gradients of `f(θ) = ⟨ψ|U(θ)† M U(θ)|ψ⟩` with respect to one named parameter.

use num_complex::Complex64;
use rayon::prelude::*;

use super::rule::{canonical_shift_rule, ShiftRule};
use crate::error::{Error, Result};
use crate::fock::{Caps, FockState};
use crate::interferometer::{fock_matrix, photon_bound_at, BoundComponent, ParamCircuit};
use crate::sampling::{estimate_bound, Estimate, NoiseModel, Observable, PhotonLadder};

#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult {
    pub parameter: String,
    /// Real part of `complex`.
    pub value: f64,
    pub complex: Complex64,
    /// Circuit executions, counting each measurement setting separately.
    pub evaluations: usize,
    pub shots: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifference {
    pub step: f64,
    /// Symmetric difference; the default forward form matches the two-point estimator.
    pub central: bool,
}

impl FiniteDifference {
    pub fn forward(step: f64) -> Self {
        FiniteDifference { step, central: false }
    }

    pub fn central(step: f64) -> Self {
        FiniteDifference { step, central: true }
    }
}

impl Default for FiniteDifference {
    fn default() -> Self {
        FiniteDifference::forward(0.01)
    }
}

/// Shift rule for every phase shifter tagged by `parameter`, keyed by component index.
pub(crate) fn shift_plan(
    circuit: &ParamCircuit,
    input: &FockState,
    parameter: &str,
    use_light_cone: bool,
) -> Result<Vec<(usize, ShiftRule)>> {
    circuit
        .occurrences(parameter)?
        .into_iter()
        .map(|site| {
            let nu = if use_light_cone {
                photon_bound_at(circuit, input, site)?
            } else {
                input.photons()
            };
            Ok((site, canonical_shift_rule(nu)?))
        })
        .collect()
}

/// A circuit, an input and an observable, with the Fock bases they need.
#[derive(Debug)]
pub struct ExpectationProblem<'a> {
    circuit: &'a ParamCircuit,
    input: &'a FockState,
    observable: &'a Observable,
    ladder: PhotonLadder,
}

impl<'a> ExpectationProblem<'a> {
    pub fn new(circuit: &'a ParamCircuit, input: &'a FockState, observable: &'a Observable) -> Result<Self> {
        if input.modes() != circuit.modes() {
            return Err(Error::ModeMismatch {
                expected: circuit.modes(),
                got: input.modes(),
            });
        }
        Ok(ExpectationProblem {
            circuit,
            input,
            observable,
            ladder: PhotonLadder::new(input.photons(), circuit.modes())?,
        })
    }

    pub fn circuit(&self) -> &ParamCircuit {
        self.circuit
    }

    pub fn expectation(&self, theta: &[f64], noise: &NoiseModel) -> Result<Estimate> {
        estimate_bound(
            &self.circuit.bind(theta)?,
            &self.ladder,
            self.input,
            self.observable,
            noise,
        )
    }

    /// Shifted evaluations needed by [`Self::psr_gradient`].
    pub fn evaluation_count(&self, parameter: &str, use_light_cone: bool) -> Result<usize> {
        let plan = shift_plan(self.circuit, self.input, parameter, use_light_cone)?;
        Ok(plan.iter().map(|(_, r)| r.len()).sum::<usize>() * self.observable.num_terms())
    }

    /// Shift-rule gradient, summed over every shifter tagged by `parameter`.
    /// Evaluation `(occurrence, p)` draws from stream `(parameter index, occurrence, p)`.
    pub fn psr_gradient(
        &self,
        theta: &[f64],
        parameter: &str,
        noise: &NoiseModel,
        use_light_cone: bool,
    ) -> Result<GradientResult> {
        let index = self.circuit.parameter_index(parameter)?;
        let bound = self.circuit.bind(theta)?;
        let mut complex = Complex64::new(0.0, 0.0);
        let mut evaluations = 0;
        let mut shots = 0;
        for (occ, (site, rule)) in shift_plan(self.circuit, self.input, parameter, use_light_cone)?
            .into_iter()
            .enumerate()
        {
            for (p, (&angle, &c)) in rule.angles.iter().zip(&rule.coefficients).enumerate() {
                let stream = noise.reseeded(&[index as u64, occ as u64, p as u64]);
                let e = estimate_bound(
                    &bound.with_shift(site, angle),
                    &self.ladder,
                    self.input,
                    self.observable,
                    &stream,
                )?;
                complex += e.complex * c;
                evaluations += e.evaluations;
                shots += e.shots;
            }
        }
        Ok(GradientResult {
            parameter: parameter.to_string(),
            value: complex.re,
            complex,
            evaluations,
            shots,
        })
    }

    /// All parameters, evaluated concurrently.
    pub fn psr_gradient_vector(
        &self,
        theta: &[f64],
        noise: &NoiseModel,
        use_light_cone: bool,
    ) -> Result<Vec<GradientResult>> {
        self.circuit
            .parameters()
            .par_iter()
            .map(|name| self.psr_gradient(theta, name, noise, use_light_cone))
            .collect()
    }

    /// Difference quotient along `parameter`; streams `(parameter index, 0|1)`.
    pub fn fd_gradient(
        &self,
        theta: &[f64],
        parameter: &str,
        fd: FiniteDifference,
        noise: &NoiseModel,
    ) -> Result<GradientResult> {
        if !(fd.step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step must be positive, got {}",
                fd.step
            )));
        }
        let index = self.circuit.parameter_index(parameter)?;
        let at = |offset: f64, slot: u64| {
            let mut shifted = theta.to_vec();
            shifted[index] += offset;
            self.expectation(&shifted, &noise.reseeded(&[index as u64, slot]))
        };
        let (lo, hi, width) = if fd.central {
            (at(-fd.step, 0)?, at(fd.step, 1)?, 2.0 * fd.step)
        } else {
            (at(0.0, 0)?, at(fd.step, 1)?, fd.step)
        };
        let complex = (hi.complex - lo.complex) / width;
        Ok(GradientResult {
            parameter: parameter.to_string(),
            value: complex.re,
            complex,
            evaluations: lo.evaluations + hi.evaluations,
            shots: lo.shots + hi.shots,
        })
    }

    /// `Σ_sites i⟨φ|[W₂†MW₂, n̂_k]|φ⟩` with `φ = e^{iθn̂_k}W₁|ψ⟩`, from dense
    /// Fock-space matrices. Exact and noise-free by construction.
    pub fn commutator_gradient(&self, theta: &[f64], parameter: &str, caps: &Caps) -> Result<Complex64> {
        let basis = self.ladder.top();
        let m = self.observable.to_dense(basis, caps)?;
        let bound = self.circuit.bind(theta)?;
        let start = basis.index_of(self.input).ok_or(Error::PhotonMismatch {
            expected: basis.photons(),
            got: self.input.photons(),
        })?;
        let mut total = Complex64::new(0.0, 0.0);
        for site in self.circuit.occurrences(parameter)? {
            let (mode, angle) = match &bound.components()[site] {
                BoundComponent::PhaseShifter { mode, theta } => (*mode, *theta),
                _ => unreachable!("parameters only tag phase shifters"),
            };
            let (before, after) = bound.split_at(site);
            let w1 = fock_matrix(&before.unitary(), basis, caps)?;
            let w2 = fock_matrix(&after.unitary(), basis, caps)?;
            let counts = basis.mode_occupations(mode)?;
            let phi: Vec<Complex64> = (0..basis.len())
                .map(|r| w1[(r, start)] * Complex64::from_polar(1.0, angle * counts[r] as f64))
                .collect();
            let heis = w2.adjoint() * &m * &w2;
            // [H, n̂]_rc = H_rc (n_c − n_r)
            let mut value = Complex64::new(0.0, 0.0);
            for r in 0..basis.len() {
                for c in 0..basis.len() {
                    let comm = heis[(r, c)] * (counts[c] as f64 - counts[r] as f64);
                    value += phi[r].conj() * comm * phi[c];
                }
            }
            total += Complex64::i() * value;
        }
        Ok(total)
    }
}

/// PSR gradient of `⟨M⟩` with respect to `parameter`.
pub fn psr_gradient(
    circuit: &ParamCircuit,
    theta: &[f64],
    input: &FockState,
    observable: &Observable,
    parameter: &str,
    noise: &NoiseModel,
    use_light_cone: bool,
) -> Result<GradientResult> {
    ExpectationProblem::new(circuit, input, observable)?.psr_gradient(theta, parameter, noise, use_light_cone)
}

/// Forward-difference gradient `(f(θ+Δ) − f(θ))/Δ`.
pub fn fd_gradient(
    circuit: &ParamCircuit,
    theta: &[f64],
    input: &FockState,
    observable: &Observable,
    parameter: &str,
    step: f64,
    noise: &NoiseModel,
) -> Result<GradientResult> {
    ExpectationProblem::new(circuit, input, observable)?.fd_gradient(
        theta,
        parameter,
        FiniteDifference::forward(step),
        noise,
    )
}

/// Exact gradient from the commutator with the number operator.
pub fn commutator_gradient_oracle(
    circuit: &ParamCircuit,
    theta: &[f64],
    input: &FockState,
    observable: &Observable,
    parameter: &str,
) -> Result<Complex64> {
    ExpectationProblem::new(circuit, input, observable)?.commutator_gradient(theta, parameter, &Caps::default())
}
