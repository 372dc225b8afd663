use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ansatz::{gaussian_mixture, qcbm_ansatz, vqe_ansatz, DualRail};
use super::config::{ExperimentConfig, ExperimentKind, LossKind, QcbmSettings, VqeSettings};
use super::hamiltonian::PauliHamiltonian;
use super::{aggregate, summarize, Provenance, RepetitionRun, RunArtifact};
use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockState};
use crate::interferometer::ParamCircuit;
use crate::losses::{LossProblem, LossSpec};
use crate::optimizers::{optimize, Method, Objective};
use crate::sampling::derive_seed;

/// Stream for starting points, shared by every optimizer arm.
const INIT_STREAM: u64 = 0x1417;

fn initial_point(config: &ExperimentConfig, dim: usize, repetition: usize) -> Result<Vec<f64>> {
    if let Some(theta) = &config.initial {
        if theta.len() != dim {
            return Err(Error::ParameterCount {
                expected: dim,
                got: theta.len(),
            });
        }
        return Ok(theta.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.noise.seed, &[INIT_STREAM, repetition as u64]));
    Ok((0..dim).map(|_| rng.random_range(0.0..TAU)).collect())
}

/// Every (optimizer, repetition) pair, concurrently; arm `a`, repetition `r`
/// samples from stream `(a, r)`.
fn run_arms(config: &ExperimentConfig, objective: &LossProblem) -> Result<Vec<RepetitionRun>> {
    let jobs: Vec<(usize, usize)> = (0..config.optimizers.len())
        .flat_map(|a| (0..config.repetitions).map(move |r| (a, r)))
        .collect();
    jobs.into_par_iter()
        .map(|(arm, repetition)| {
            let opt = &config.optimizers[arm];
            let theta0 = initial_point(config, objective.dim(), repetition)?;
            let noise = config.noise.reseeded(&[arm as u64, repetition as u64]);
            let trace = optimize(objective, &theta0, opt, &noise)?;
            Ok(RepetitionRun {
                optimizer: opt.method,
                repetition,
                trace,
            })
        })
        .collect()
}

fn custom_circuit(config: &ExperimentConfig) -> Result<Option<(ParamCircuit, FockState)>> {
    let Some(path) = &config.circuit else {
        return Ok(None);
    };
    let (circuit, input) = ParamCircuit::load(path)?;
    let input = input.ok_or_else(|| Error::InvalidArgument(format!("{} has no input state", path.display())))?;
    Ok(Some((circuit, input)))
}

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    config.validate()?;
    if config.kind != kind {
        return Err(Error::InvalidArgument(format!(
            "config is for `{}`, not `{}`",
            config.kind.name(),
            kind.name()
        )));
    }
    Ok(())
}

fn order(config: &ExperimentConfig) -> Vec<Method> {
    config.optimizers.iter().map(|o| o.method).collect()
}

/// Ground-state search on dual-rail qubits. A custom circuit keeps rails `(2q, 2q+1)`.
pub fn run_vqe(config: &ExperimentConfig) -> Result<RunArtifact> {
    expect_kind(config, ExperimentKind::Vqe)?;
    let start = Instant::now();
    let settings = config.vqe.clone().unwrap_or_default();
    let VqeSettings { hamiltonian } = settings;
    let h = PauliHamiltonian::new(hamiltonian)?;
    let (circuit, input, rails) = match custom_circuit(config)? {
        Some((circuit, input)) => {
            let pairs = (0..h.qubits()).map(|q| (2 * q, 2 * q + 1)).collect();
            let rails = DualRail::new(circuit.modes(), pairs)?;
            (circuit, input, rails)
        }
        None => vqe_ansatz(),
    };
    let basis = FockBasis::new(input.photons(), circuit.modes())?;
    let observable = h.observable(&rails, &basis)?;
    let problem = LossProblem::new(circuit, input, LossSpec::Energy(observable))?;
    let runs = run_arms(config, &problem)?;
    let order = order(config);
    Ok(RunArtifact {
        config: config.clone(),
        provenance: Provenance::of(config),
        aggregate: aggregate(&runs, &order),
        summaries: summarize(&runs, &order),
        runs,
        oracle: Some(h.ground_energy()),
        tables: Vec::new(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Born-machine training against a target over Fock outcomes.
pub fn run_qcbm(config: &ExperimentConfig) -> Result<RunArtifact> {
    expect_kind(config, ExperimentKind::Qcbm)?;
    let start = Instant::now();
    let settings: QcbmSettings = config.qcbm.clone().unwrap_or_default();
    let (circuit, input) = match custom_circuit(config)? {
        Some(pair) => pair,
        None => qcbm_ansatz(),
    };
    let basis = FockBasis::new(input.photons(), circuit.modes())?;
    let target = match &settings.target.values {
        Some(v) => v.clone(),
        None => gaussian_mixture(
            basis.len(),
            &settings.target.means,
            settings.target.sigma,
            &settings.target.weights,
        )?,
    };
    let spec = match settings.loss {
        LossKind::Kl => LossSpec::Kl { target: target.clone() },
        LossKind::Mmd => LossSpec::Mmd {
            target: target.clone(),
            sigmas: settings.sigmas.clone(),
        },
    };
    let problem = LossProblem::new(circuit, input, spec)?;
    let runs = run_arms(config, &problem)?;
    let order = order(config);
    let histogram = histogram_csv(config, &problem, &basis, &target, &runs, &order)?;
    Ok(RunArtifact {
        config: config.clone(),
        provenance: Provenance::of(config),
        aggregate: aggregate(&runs, &order),
        summaries: summarize(&runs, &order),
        runs,
        oracle: None,
        tables: vec![("histogram.csv".to_string(), histogram)],
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Target next to each optimizer's final distribution (infinite shots, configured
/// visibility), averaged over repetitions.
fn histogram_csv(
    config: &ExperimentConfig,
    problem: &LossProblem,
    basis: &FockBasis,
    target: &[f64],
    runs: &[RepetitionRun],
    order: &[Method],
) -> Result<String> {
    let exact = config.noise.without_shots();
    let mut columns = Vec::with_capacity(order.len());
    for &method in order {
        let arm: Vec<&RepetitionRun> = runs.iter().filter(|r| r.optimizer == method).collect();
        let mut mean = vec![0.0; basis.len()];
        for run in &arm {
            let (q, _) = problem.distribution(&run.trace.final_record().theta, &exact, &[0])?;
            mean.iter_mut().zip(q).for_each(|(m, x)| *m += x / arm.len() as f64);
        }
        columns.push(mean);
    }
    let mut out = String::from("index,state,target");
    for m in order {
        let _ = write!(out, ",{m}");
    }
    out.push('\n');
    for (i, state) in basis.states().iter().enumerate() {
        let occ: Vec<String> = state.occupations().iter().map(|o| o.to_string()).collect();
        let _ = write!(out, "{i},{},{}", occ.join(" "), target[i]);
        for col in &columns {
            let _ = write!(out, ",{}", col[i]);
        }
        out.push('\n');
    }
    Ok(out)
}
