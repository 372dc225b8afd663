use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind, GradCheckSettings};
use super::{pretty, write_files, Provenance};
use crate::error::{Error, Result};
use crate::fock::{Caps, FockBasis, FockState};
use crate::instances::{random_circuit, random_complex_matrix, random_distribution, random_hermitian, random_input};
use crate::interferometer::ParamCircuit;
use crate::losses::{LossProblem, LossSpec, MixtureKernel};
use crate::optimizers::Objective;
use crate::sampling::{derive_seed, MeasuredTerm, NoiseModel, Observable};
use crate::shift_rules::gradient::shift_plan;
use crate::shift_rules::{hoeffding_failure_bound, ExpectationProblem};

const CONCENTRATION_STREAM: u64 = 0xc0c0;
const FD_STEP: f64 = 1e-6;

/// A tolerance breach, with enough to rebuild the instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceFailure {
    pub instance: usize,
    pub seed: u64,
    pub check: String,
    pub parameter: String,
    pub deviation: f64,
    pub circuit: serde_json::Value,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub epsilon: f64,
    pub shots: u64,
    pub seeds: usize,
    pub lambda: f64,
    pub coefficient_norm: f64,
    pub exceed_rate: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub provenance: Provenance,
    pub instances: usize,
    pub gradients: usize,
    /// Largest `|psr − commutator oracle|`.
    pub max_oracle_deviation: f64,
    /// Largest difference between light-cone and full-rule gradients.
    pub max_light_cone_deviation: f64,
    /// Largest `|psr − central difference|` for the KL and MMD losses.
    pub max_loss_deviation: f64,
    /// Empty in exact mode.
    pub concentration: Vec<ConcentrationRow>,
    pub failures: Vec<InstanceFailure>,
    #[serde(skip)]
    pub config: ExperimentConfig,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.concentration.iter().all(|c| c.exceed_rate <= c.bound)
    }

    pub fn report_csv(&self) -> String {
        let mut out = format!("{}\ncheck,value,limit\n", self.provenance.comment());
        let s = self.settings();
        let _ = writeln!(out, "oracle,{},{}", self.max_oracle_deviation, s.tolerance);
        let _ = writeln!(out, "light_cone,{},{}", self.max_light_cone_deviation, s.tolerance);
        let _ = writeln!(out, "loss_fd,{},{}", self.max_loss_deviation, s.fd_tolerance);
        for c in &self.concentration {
            let _ = writeln!(out, "concentration_eps_{},{},{}", c.epsilon, c.exceed_rate, c.bound);
        }
        out
    }

    fn settings(&self) -> GradCheckSettings {
        self.config.gradcheck.clone().unwrap_or_default()
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let mut summary = serde_json::to_value(self).expect("report serializes");
        summary["passed"] = self.passed().into();
        let mut files = vec![
            ("config.json".to_string(), self.config.to_pretty_json()),
            ("report.csv".to_string(), self.report_csv()),
            ("summary.json".to_string(), pretty(&summary)),
        ];
        for f in &self.failures {
            files.push((
                format!("failure_{}_{}_{}.json", f.instance, f.check, f.parameter),
                pretty(&serde_json::to_value(f).expect("failure serializes")),
            ));
        }
        write_files(dir, &files)
    }
}

#[derive(Default)]
struct InstanceOutcome {
    gradients: usize,
    oracle: f64,
    light_cone: f64,
    loss: f64,
    failures: Vec<InstanceFailure>,
}

struct Instance {
    index: usize,
    seed: u64,
    circuit: ParamCircuit,
    input: FockState,
    theta: Vec<f64>,
}

impl Instance {
    fn generate(index: usize, root: u64, s: &GradCheckSettings) -> Instance {
        let seed = derive_seed(root, &[index as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = rng.random_range(2..=s.max_modes.max(2));
        let photons = s.photons.unwrap_or_else(|| rng.random_range(0..=s.max_photons));
        let (circuit, theta) = random_circuit(modes, s.max_components, &mut rng);
        let input = random_input(photons, modes, &mut rng);
        Instance {
            index,
            seed,
            circuit,
            input,
            theta,
        }
    }

    fn failure(&self, check: &str, parameter: &str, deviation: f64) -> InstanceFailure {
        InstanceFailure {
            instance: self.index,
            seed: self.seed,
            check: check.to_string(),
            parameter: parameter.to_string(),
            deviation,
            circuit: self.circuit.to_json(Some(&self.input)),
            theta: self.theta.clone(),
        }
    }

    /// Hermitian observables on even instances, general ones on odd.
    fn check(&self, s: &GradCheckSettings) -> Result<InstanceOutcome> {
        let exact = NoiseModel::exact();
        let basis = FockBasis::new(self.input.photons(), self.circuit.modes())?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[1]));
        let matrix: DMatrix<Complex64> = if self.index.is_multiple_of(2) {
            random_hermitian(basis.len(), &mut rng)
        } else {
            random_complex_matrix(basis.len(), basis.len(), &mut rng)
        };
        let observable = Observable::Dense(matrix);
        let problem = ExpectationProblem::new(&self.circuit, &self.input, &observable)?;
        let mut out = InstanceOutcome::default();
        for name in self.circuit.parameters() {
            let psr = problem.psr_gradient(&self.theta, name, &exact, true)?;
            let full = problem.psr_gradient(&self.theta, name, &exact, false)?;
            let oracle = problem.commutator_gradient(&self.theta, name, &Caps::default())?;
            let dev = (psr.complex - oracle).norm();
            let cone = (psr.complex - full.complex).norm();
            out.gradients += 1;
            out.oracle = out.oracle.max(dev);
            out.light_cone = out.light_cone.max(cone);
            if !(dev < s.tolerance) {
                out.failures.push(self.failure("oracle", name, dev));
            }
            if !(cone < s.tolerance) {
                out.failures.push(self.failure("light_cone", name, cone));
            }
            if self.input.photons() == 0 && psr.complex != Complex64::new(0.0, 0.0) {
                out.failures.push(self.failure("zero_photon", name, psr.complex.norm()));
            }
        }

        let target = random_distribution(basis.len(), &mut rng);
        let (spec, check) = if self.index.is_multiple_of(2) {
            (LossSpec::Kl { target }, "kl_fd")
        } else {
            let sigmas = MixtureKernel::DEFAULT_SIGMAS.to_vec();
            (LossSpec::Mmd { target, sigmas }, "mmd_fd")
        };
        let losses = LossProblem::new(self.circuit.clone(), self.input.clone(), spec)?;
        let (grad, _) = losses.psr_gradient(&self.theta, &exact)?;
        for (i, (name, g)) in self.circuit.parameters().iter().zip(grad).enumerate() {
            let at = |d: f64| {
                let mut t = self.theta.clone();
                t[i] += d;
                losses.loss(&t, &exact).map(|e| e.value)
            };
            let fd = (at(FD_STEP)? - at(-FD_STEP)?) / (2.0 * FD_STEP);
            let dev = (g - fd).abs();
            out.loss = out.loss.max(dev);
            if !(dev < s.fd_tolerance) {
                out.failures.push(self.failure(check, name, dev));
            }
        }
        Ok(out)
    }
}

/// Sampled shift-rule estimates of one gradient over many seeds, against the
/// Hoeffding bound for each `ε`.
fn concentration(config: &ExperimentConfig, s: &GradCheckSettings) -> Result<Vec<ConcentrationRow>> {
    let noise = config.noise;
    let shots = noise.shots.count();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(noise.seed, &[CONCENTRATION_STREAM]));
    let modes = rng.random_range(2..=s.max_modes.max(2));
    let photons = s.photons.unwrap_or_else(|| rng.random_range(1..=s.max_photons.max(1)));
    let (circuit, theta) = random_circuit(modes, s.max_components, &mut rng);
    let input = random_input(photons, modes, &mut rng);
    let basis = FockBasis::new(photons, modes)?;
    let values: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let observable = Observable::Measured(vec![MeasuredTerm::diagonal(values)]);
    let lambda = observable.bound();
    let parameter = &circuit.parameters()[0];
    let problem = ExpectationProblem::new(&circuit, &input, &observable)?;
    let exact = problem
        .psr_gradient(&theta, parameter, &noise.without_shots(), true)?
        .value;
    let coefficient_norm: f64 = shift_plan(&circuit, &input, parameter, true)?
        .iter()
        .map(|(_, r)| r.coefficient_norm())
        .sum();
    let errors = (0..s.seeds)
        .into_par_iter()
        .map(|k| {
            let stream = noise.reseeded(&[CONCENTRATION_STREAM, k as u64]);
            Ok((problem.psr_gradient(&theta, parameter, &stream, true)?.value - exact).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(s.epsilons
        .iter()
        .map(|&epsilon| ConcentrationRow {
            epsilon,
            shots,
            seeds: s.seeds,
            lambda,
            coefficient_norm,
            exceed_rate: errors.iter().filter(|&&e| e > epsilon).count() as f64 / s.seeds as f64,
            bound: hoeffding_failure_bound(epsilon, shots, lambda, coefficient_norm),
        })
        .collect())
}

/// Random-instance comparison of every gradient route against its oracle.
/// Breaches are collected in the report rather than returned as errors.
pub fn run_grad_check(config: &ExperimentConfig) -> Result<GradCheckReport> {
    config.validate()?;
    if config.kind != ExperimentKind::Gradcheck {
        return Err(Error::InvalidArgument(format!(
            "config is for `{}`, not `gradcheck`",
            config.kind.name()
        )));
    }
    let s = config.gradcheck.clone().unwrap_or_default();
    if s.max_modes < 2 || s.max_components == 0 {
        return Err(Error::InvalidArgument("need at least 2 modes and 1 component".into()));
    }
    let outcomes = (0..s.instances)
        .into_par_iter()
        .map(|i| Instance::generate(i, config.noise.seed, &s).check(&s))
        .collect::<Result<Vec<_>>>()?;
    let concentration = if config.noise.shots.is_exact() || s.seeds == 0 {
        Vec::new()
    } else {
        concentration(config, &s)?
    };
    let mut report = GradCheckReport {
        provenance: Provenance::of(config),
        instances: s.instances,
        gradients: 0,
        max_oracle_deviation: 0.0,
        max_light_cone_deviation: 0.0,
        max_loss_deviation: 0.0,
        concentration,
        failures: Vec::new(),
        config: config.clone(),
    };
    for o in outcomes {
        report.gradients += o.gradients;
        report.max_oracle_deviation = report.max_oracle_deviation.max(o.oracle);
        report.max_light_cone_deviation = report.max_light_cone_deviation.max(o.light_cone);
        report.max_loss_deviation = report.max_loss_deviation.max(o.loss);
        report.failures.extend(o.failures);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(settings: GradCheckSettings) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Gradcheck);
        cfg.gradcheck = Some(settings);
        cfg
    }

    #[test]
    fn small_default_run_passes() {
        let report = run_grad_check(&config(GradCheckSettings {
            instances: 12,
            max_photons: 2,
            max_modes: 4,
            max_components: 10,
            ..GradCheckSettings::default()
        }))
        .unwrap();
        assert!(report.passed(), "{:?}", report.failures);
        assert!(report.max_oracle_deviation < 1e-9);
        assert!(report.gradients >= 12);
        assert_eq!(report.report_csv().lines().count(), 5);
    }

    #[test]
    fn zero_photons_give_zero_gradients() {
        let report = run_grad_check(&config(GradCheckSettings {
            instances: 6,
            photons: Some(0),
            ..GradCheckSettings::default()
        }))
        .unwrap();
        assert!(report.passed());
        assert_eq!(report.max_oracle_deviation, 0.0);
    }

    #[test]
    fn impossible_tolerance_is_reported() {
        let mut cfg = config(GradCheckSettings {
            instances: 3,
            max_photons: 2,
            photons: Some(2),
            tolerance: 0.0,
            ..GradCheckSettings::default()
        });
        cfg.noise.seed = 5;
        let report = run_grad_check(&cfg).unwrap();
        assert!(!report.passed());
        let f = &report.failures[0];
        assert!(f.circuit.get("input").is_some());
        let dir = tempfile::tempdir().unwrap();
        report.write_to(dir.path()).unwrap();
        assert!(std::fs::read_dir(dir.path()).unwrap().count() > 3);
    }

    #[test]
    fn concentration_respects_bound() {
        let mut cfg = config(GradCheckSettings {
            instances: 0,
            max_photons: 2,
            max_modes: 4,
            seeds: 60,
            ..GradCheckSettings::default()
        });
        cfg.noise = NoiseModel::sampled(2000, 0.9, 1);
        let report = run_grad_check(&cfg).unwrap();
        assert_eq!(report.concentration.len(), 2);
        assert!(report.passed(), "{:?}", report.concentration);
    }
}
