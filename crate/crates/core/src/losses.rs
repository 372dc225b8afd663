//! Variational loss functions and their shift-rule gradients.
//!
//! Distribution losses see the circuit only through its outcome probabilities
//! `Q_θ(x)`. Each `Q_θ(x)` obeys the shift rule on its own, so a single set of
//! shifted runs gives `∂Q_θ` for every outcome at once.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::interferometer::ParamCircuit;
use crate::optimizers::{Evaluation, Objective};
use crate::sampling::{observed_distribution, validate_distribution, NoiseModel, Observable, PhotonLadder};
use crate::shift_rules::{gradient::shift_plan, ExpectationProblem, GradientResult};

/// Probabilities below this are raised to it inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// `Σ_x Q(x) log(Q(x)/T(x))`, skipping `Q(x) = 0`.
pub fn kl_loss(q: &[f64], t: &[f64]) -> Result<f64> {
    check_pair(q, t)?;
    let mut total = 0.0;
    for (x, (&qx, &tx)) in q.iter().zip(t).enumerate() {
        if qx <= 0.0 {
            continue;
        }
        if tx <= 0.0 {
            return Err(Error::ZeroTarget { index: x });
        }
        total += qx * (qx.max(PROB_FLOOR) / tx.max(PROB_FLOOR)).ln();
    }
    Ok(total)
}

/// `∂D = Σ_x ∂Q(x) (1 + log(Q(x)/T(x)))` over outcomes with `Q(x) > 0`.
fn kl_from_derivative(q: &[f64], dq: &[f64], t: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (x, ((&qx, &dx), &tx)) in q.iter().zip(dq).zip(t).enumerate() {
        if qx <= 0.0 {
            continue;
        }
        if tx <= 0.0 {
            return Err(Error::ZeroTarget { index: x });
        }
        total += dx * (1.0 + (qx.max(PROB_FLOOR) / tx.max(PROB_FLOOR)).ln());
    }
    Ok(total)
}

fn check_pair(q: &[f64], t: &[f64]) -> Result<()> {
    if q.len() != t.len() {
        return Err(Error::Dimension(format!("{} vs {} outcomes", q.len(), t.len())));
    }
    Ok(())
}

/// Gaussian-mixture kernel `k(x,y) = (1/c) Σ_i exp(−|x−y|²/(2σ_i))` on outcome indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureKernel {
    sigmas: Vec<f64>,
}

impl MixtureKernel {
    pub const DEFAULT_SIGMAS: [f64; 3] = [0.5, 4.0, 32.0];

    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::InvalidArgument("empty bandwidth list".into()));
        }
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {s}")));
        }
        Ok(MixtureKernel { sigmas })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn eval(&self, x: usize, y: usize) -> f64 {
        let d2 = (x as f64 - y as f64).powi(2);
        self.sigmas.iter().map(|s| (-d2 / (2.0 * s)).exp()).sum::<f64>() / self.sigmas.len() as f64
    }

    pub fn matrix(&self, len: usize) -> DMatrix<f64> {
        DMatrix::from_fn(len, len, |x, y| self.eval(x, y))
    }
}

/// `(Q − T)ᵀ K (Q − T)`
pub fn mmd_loss(q: &[f64], t: &[f64], sigmas: &[f64]) -> Result<f64> {
    check_pair(q, t)?;
    let kernel = MixtureKernel::new(sigmas.to_vec())?;
    Ok(mmd_with(q, t, &kernel.matrix(q.len())))
}

fn mmd_with(q: &[f64], t: &[f64], k: &DMatrix<f64>) -> f64 {
    let d = DVector::from_iterator(q.len(), q.iter().zip(t).map(|(a, b)| a - b));
    (d.transpose() * k * &d)[(0, 0)]
}

/// `2 Σ_p c_p (Q_{θ+θ_p}ᵀ K Q_θ − Q_{θ+θ_p}ᵀ K T) = 2 ∂Qᵀ K (Q_θ − T)`
fn mmd_from_derivative(q: &[f64], dq: &[f64], t: &[f64], k: &DMatrix<f64>) -> f64 {
    let dq = DVector::from_column_slice(dq);
    let diff = DVector::from_iterator(q.len(), q.iter().zip(t).map(|(a, b)| a - b));
    2.0 * (dq.transpose() * k * diff)[(0, 0)]
}

/// What a variational run minimizes.
#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    /// Expectation of a (weighted, possibly multi-setting) observable.
    Energy(Observable),
    Kl {
        target: Vec<f64>,
    },
    Mmd {
        target: Vec<f64>,
        sigmas: Vec<f64>,
    },
}

/// Estimated `∂Q_θ(x)` for every outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionDerivative {
    pub values: Vec<f64>,
    pub evaluations: usize,
    pub shots: u64,
}

/// A loss bound to a circuit and input, ready for optimization.
#[derive(Debug)]
pub struct LossProblem {
    circuit: ParamCircuit,
    input: FockState,
    spec: LossSpec,
    ladder: PhotonLadder,
    kernel: Option<DMatrix<f64>>,
    use_light_cone: bool,
}

impl LossProblem {
    pub fn new(circuit: ParamCircuit, input: FockState, spec: LossSpec) -> Result<Self> {
        if input.modes() != circuit.modes() {
            return Err(Error::ModeMismatch {
                expected: circuit.modes(),
                got: input.modes(),
            });
        }
        let ladder = PhotonLadder::new(input.photons(), circuit.modes())?;
        let outcomes = ladder.top().len();
        let kernel = match &spec {
            LossSpec::Energy(_) => None,
            LossSpec::Kl { target } => {
                check_target(target, outcomes)?;
                None
            }
            LossSpec::Mmd { target, sigmas } => {
                check_target(target, outcomes)?;
                Some(MixtureKernel::new(sigmas.clone())?.matrix(outcomes))
            }
        };
        Ok(LossProblem {
            circuit,
            input,
            spec,
            ladder,
            kernel,
            use_light_cone: true,
        })
    }

    /// Disables the per-shifter photon bound (full `2n`-term rules everywhere).
    pub fn without_light_cone(mut self) -> Self {
        self.use_light_cone = false;
        self
    }

    pub fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    pub fn input(&self) -> &FockState {
        &self.input
    }

    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    pub fn outcomes(&self) -> usize {
        self.ladder.top().len()
    }

    /// Output distribution seen through `noise` on stream `key`.
    pub fn distribution(&self, theta: &[f64], noise: &NoiseModel, key: &[u64]) -> Result<(Vec<f64>, u64)> {
        noise.validate()?;
        observed_distribution(&self.circuit.bind(theta)?, &self.ladder, &self.input, noise, key)
    }

    /// Shift-rule estimate of `∂Q_θ/∂parameter`; streams `(1, parameter, occurrence, p)`.
    pub fn distribution_derivative(
        &self,
        theta: &[f64],
        parameter: &str,
        noise: &NoiseModel,
    ) -> Result<DistributionDerivative> {
        let index = self.circuit.parameter_index(parameter)? as u64;
        let bound = self.circuit.bind(theta)?;
        let mut values = vec![0.0; self.outcomes()];
        let mut evaluations = 0;
        let mut shots = 0;
        for (occ, (site, rule)) in shift_plan(&self.circuit, &self.input, parameter, self.use_light_cone)?
            .into_iter()
            .enumerate()
        {
            for (p, (&angle, &c)) in rule.angles.iter().zip(&rule.coefficients).enumerate() {
                let (q, n) = observed_distribution(
                    &bound.with_shift(site, angle),
                    &self.ladder,
                    &self.input,
                    noise,
                    &[1, index, occ as u64, p as u64],
                )?;
                values.iter_mut().zip(q).for_each(|(v, qx)| *v += c * qx);
                evaluations += 1;
                shots += n;
            }
        }
        Ok(DistributionDerivative {
            values,
            evaluations,
            shots,
        })
    }

    fn loss_from_distribution(&self, q: &[f64]) -> Result<f64> {
        match &self.spec {
            LossSpec::Energy(_) => unreachable!("energy losses are not distribution losses"),
            LossSpec::Kl { target } => kl_loss(q, target),
            LossSpec::Mmd { target, .. } => Ok(mmd_with(q, target, self.kernel.as_ref().unwrap())),
        }
    }

    fn gradient_from_derivative(&self, q: &[f64], dq: &[f64]) -> Result<f64> {
        match &self.spec {
            LossSpec::Energy(_) => unreachable!("energy losses are not distribution losses"),
            LossSpec::Kl { target } => kl_from_derivative(q, dq, target),
            LossSpec::Mmd { target, .. } => Ok(mmd_from_derivative(q, dq, target, self.kernel.as_ref().unwrap())),
        }
    }

    /// Shift-rule gradient of the loss along one parameter.
    pub fn psr_gradient_for(&self, theta: &[f64], parameter: &str, noise: &NoiseModel) -> Result<GradientResult> {
        noise.validate()?;
        match &self.spec {
            LossSpec::Energy(obs) => ExpectationProblem::new(&self.circuit, &self.input, obs)?.psr_gradient(
                theta,
                parameter,
                noise,
                self.use_light_cone,
            ),
            _ => {
                let (q, n0) = self.distribution(theta, noise, &[0])?;
                let d = self.distribution_derivative(theta, parameter, noise)?;
                let value = self.gradient_from_derivative(&q, &d.values)?;
                Ok(GradientResult {
                    parameter: parameter.to_string(),
                    value,
                    complex: value.into(),
                    evaluations: 1 + d.evaluations,
                    shots: n0 + d.shots,
                })
            }
        }
    }
}

fn check_target(target: &[f64], outcomes: usize) -> Result<()> {
    if target.len() != outcomes {
        return Err(Error::Dimension(format!(
            "target over {} outcomes, circuit has {outcomes}",
            target.len()
        )));
    }
    validate_distribution(target)
}

impl Objective for LossProblem {
    fn dim(&self) -> usize {
        self.circuit.num_parameters()
    }

    fn loss(&self, theta: &[f64], noise: &NoiseModel) -> Result<Evaluation> {
        noise.validate()?;
        match &self.spec {
            LossSpec::Energy(obs) => {
                let e =
                    crate::sampling::estimate_bound(&self.circuit.bind(theta)?, &self.ladder, &self.input, obs, noise)?;
                Ok(Evaluation {
                    value: e.value,
                    evaluations: e.evaluations,
                    shots: e.shots,
                })
            }
            _ => {
                let (q, shots) = self.distribution(theta, noise, &[0])?;
                Ok(Evaluation {
                    value: self.loss_from_distribution(&q)?,
                    evaluations: 1,
                    shots,
                })
            }
        }
    }

    /// One shared `Q_θ` plus per-parameter shifted runs, parameters in parallel.
    fn psr_gradient(&self, theta: &[f64], noise: &NoiseModel) -> Result<(Vec<f64>, Evaluation)> {
        noise.validate()?;
        let (grads, mut cost) = match &self.spec {
            LossSpec::Energy(obs) => {
                let problem = ExpectationProblem::new(&self.circuit, &self.input, obs)?;
                let results = problem.psr_gradient_vector(theta, noise, self.use_light_cone)?;
                (results, Evaluation::default())
            }
            _ => {
                let (q, n0) = self.distribution(theta, noise, &[0])?;
                let results = self
                    .circuit
                    .parameters()
                    .par_iter()
                    .map(|name| {
                        let d = self.distribution_derivative(theta, name, noise)?;
                        let value = self.gradient_from_derivative(&q, &d.values)?;
                        Ok(GradientResult {
                            parameter: name.clone(),
                            value,
                            complex: value.into(),
                            evaluations: d.evaluations,
                            shots: d.shots,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                (
                    results,
                    Evaluation {
                        value: 0.0,
                        evaluations: 1,
                        shots: n0,
                    },
                )
            }
        };
        for g in &grads {
            cost.evaluations += g.evaluations;
            cost.shots += g.shots;
        }
        Ok((grads.into_iter().map(|g| g.value).collect(), cost))
    }
}

/// Shift-rule gradient of `D_KL(Q_θ || T)`.
pub fn kl_gradient_psr(
    circuit: &ParamCircuit,
    theta: &[f64],
    input: &FockState,
    target: &[f64],
    parameter: &str,
    noise: &NoiseModel,
) -> Result<GradientResult> {
    let spec = LossSpec::Kl {
        target: target.to_vec(),
    };
    LossProblem::new(circuit.clone(), input.clone(), spec)?.psr_gradient_for(theta, parameter, noise)
}

/// Shift-rule gradient of the kernel MMD between `Q_θ` and `T`.
pub fn mmd_gradient_psr(
    circuit: &ParamCircuit,
    theta: &[f64],
    input: &FockState,
    target: &[f64],
    sigmas: &[f64],
    parameter: &str,
    noise: &NoiseModel,
) -> Result<GradientResult> {
    let spec = LossSpec::Mmd {
        target: target.to_vec(),
        sigmas: sigmas.to_vec(),
    };
    LossProblem::new(circuit.clone(), input.clone(), spec)?.psr_gradient_for(theta, parameter, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{random_circuit, random_distribution, random_input};
    use crate::interferometer::{output_distribution, Component};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kl_examples() {
        assert_eq!(kl_loss(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert!((kl_loss(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_loss(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::ZeroTarget { index: 1 }));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let q = random_distribution(12, &mut rng);
            let t = random_distribution(12, &mut rng);
            assert!(kl_loss(&q, &t).unwrap() > 0.0);
        }
    }

    #[test]
    fn mmd_examples() {
        let sigmas = MixtureKernel::DEFAULT_SIGMAS;
        let kernel = MixtureKernel::new(sigmas.to_vec()).unwrap();
        for x in 0..10 {
            assert!((kernel.eval(x, x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(mmd_loss(&[0.3, 0.7], &[0.3, 0.7], &sigmas).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let q = random_distribution(15, &mut rng);
            let t = random_distribution(15, &mut rng);
            assert!(mmd_loss(&q, &t, &sigmas).unwrap() > 0.0);
        }
        assert!(mmd_loss(&[1.0], &[1.0], &[]).is_err());
        assert!(mmd_loss(&[1.0], &[1.0], &[0.0]).is_err());
    }

    /// Central difference of the exact loss along `parameter`.
    fn fd_loss(problem: &LossProblem, theta: &[f64], parameter: &str) -> f64 {
        let i = problem.circuit().parameter_index(parameter).unwrap();
        let h = 1e-6;
        let at = |d: f64| {
            let mut t = theta.to_vec();
            t[i] += d;
            problem.loss(&t, &NoiseModel::exact()).unwrap().value
        };
        (at(h) - at(-h)) / (2.0 * h)
    }

    #[test]
    fn distribution_loss_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let modes = rng.random_range(2..=5);
            let photons = rng.random_range(1..=3);
            let (circuit, theta) = random_circuit(modes, 10, &mut rng);
            let input = random_input(photons, modes, &mut rng);
            let outcomes = crate::fock::FockBasis::new(photons, modes).unwrap().len();
            let target = random_distribution(outcomes, &mut rng);
            let spec = if trial % 2 == 0 {
                LossSpec::Kl { target }
            } else {
                LossSpec::Mmd {
                    target,
                    sigmas: MixtureKernel::DEFAULT_SIGMAS.to_vec(),
                }
            };
            let problem = LossProblem::new(circuit.clone(), input, spec).unwrap();
            let (grad, _) = problem.psr_gradient(&theta, &NoiseModel::exact()).unwrap();
            for (name, g) in circuit.parameters().iter().zip(grad) {
                let fd = fd_loss(&problem, &theta, name);
                assert!((g - fd).abs() < 1e-5, "trial {trial} {name}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn kl_bracket_regression() {
        // The derivative of Σ Q log(Q/T) carries (1 + log(Q/T)); replacing the 1
        // by T(x) disagrees with finite differences on a generic instance.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (circuit, theta) = random_circuit(4, 10, &mut rng);
        let input = FockState::new(vec![1, 1, 0, 0]);
        let target = random_distribution(10, &mut rng);
        let problem = LossProblem::new(circuit.clone(), input, LossSpec::Kl { target: target.clone() }).unwrap();
        let name = &circuit.parameters()[0];
        let (q, _) = problem.distribution(&theta, &NoiseModel::exact(), &[0]).unwrap();
        let dq = problem
            .distribution_derivative(&theta, name, &NoiseModel::exact())
            .unwrap()
            .values;
        let chain = kl_from_derivative(&q, &dq, &target).unwrap();
        let printed: f64 = (0..q.len())
            .map(|x| dq[x] * (target[x] + (q[x] / target[x]).ln()))
            .sum();
        let fd = fd_loss(&problem, &theta, name);
        assert!((chain - fd).abs() < 1e-5);
        assert!((printed - fd).abs() > 1e-3, "{printed} vs {fd}");
    }

    #[test]
    fn mmd_leading_factor_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (circuit, theta) = random_circuit(4, 10, &mut rng);
        let input = FockState::new(vec![1, 0, 1, 0]);
        let target = random_distribution(10, &mut rng);
        let sigmas = MixtureKernel::DEFAULT_SIGMAS.to_vec();
        let problem = LossProblem::new(
            circuit.clone(),
            input.clone(),
            LossSpec::Mmd {
                target: target.clone(),
                sigmas: sigmas.clone(),
            },
        )
        .unwrap();
        for name in circuit.parameters() {
            let g = mmd_gradient_psr(&circuit, &theta, &input, &target, &sigmas, name, &NoiseModel::exact()).unwrap();
            let fd = fd_loss(&problem, &theta, name);
            if fd.abs() > 1e-4 {
                assert!((g.value - fd).abs() < 1e-5);
                assert!((0.5 * g.value - fd).abs() > 0.25 * fd.abs());
            }
        }
    }

    #[test]
    fn self_target_gives_zero_kl_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (circuit, theta) = random_circuit(4, 10, &mut rng);
        let input = FockState::new(vec![1, 1, 1, 0]);
        let q = output_distribution(&circuit, &theta, &input).unwrap();
        if q.iter().all(|&x| x > 0.0) {
            for name in circuit.parameters() {
                let g = kl_gradient_psr(&circuit, &theta, &input, &q, name, &NoiseModel::exact()).unwrap();
                assert!(g.value.abs() < 1e-10);
            }
        }
        let t = random_distribution(q.len(), &mut rng);
        let g = mmd_gradient_psr(
            &circuit,
            &theta,
            &input,
            &t,
            &[1.0],
            &circuit.parameters()[0],
            &NoiseModel::exact(),
        );
        assert!(g.is_ok());
    }

    #[test]
    fn stationary_point_has_zero_gradient() {
        // single photon through BS50·PS(t)·BS50 at t = 0: every Q(x) is stationary
        let circuit = ParamCircuit::new(
            2,
            vec![Component::bs50(0, 1), Component::ps(0, "t"), Component::bs50(0, 1)],
        )
        .unwrap();
        let input = FockState::new(vec![1, 0]);
        let t = [0.3, 0.7];
        let g = kl_gradient_psr(&circuit, &[0.0], &input, &t, "t", &NoiseModel::exact()).unwrap();
        assert!(g.value.abs() < 1e-12);
    }

    #[test]
    fn sampled_gradient_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (circuit, theta) = random_circuit(3, 8, &mut rng);
        let input = FockState::new(vec![1, 1, 0]);
        let target = random_distribution(6, &mut rng);
        let problem = LossProblem::new(circuit.clone(), input, LossSpec::Kl { target }).unwrap();
        let noise = NoiseModel::sampled(500, 0.9, 3);
        let (g1, cost) = problem.psr_gradient(&theta, &noise).unwrap();
        let (g2, _) = problem.psr_gradient(&theta, &noise).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(cost.shots, cost.evaluations as u64 * 500);
        assert!(problem.loss(&theta, &noise).unwrap().value.is_finite());
    }

    #[test]
    fn target_validation() {
        let circuit = ParamCircuit::new(2, vec![Component::ps(0, "a")]).unwrap();
        let input = FockState::new(vec![1, 0]);
        assert!(LossProblem::new(circuit.clone(), input.clone(), LossSpec::Kl { target: vec![0.5, 0.6] }).is_err());
        assert!(LossProblem::new(circuit.clone(), input.clone(), LossSpec::Kl { target: vec![1.0] }).is_err());
        assert!(LossProblem::new(
            circuit,
            input,
            LossSpec::Mmd {
                target: vec![0.5, 0.5],
                sigmas: vec![]
            }
        )
        .is_err());
    }
}
