//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::hamiltonian::{default_h2_terms, PauliTerm};
use crate::error::{Error, Result};
use crate::losses::MixtureKernel;
use crate::optimizers::{Method, OptimizerConfig};
use crate::sampling::NoiseModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Vqe,
    Qcbm,
    #[serde(alias = "bound-sweep")]
    Bounds,
    #[serde(alias = "grad-check")]
    Gradcheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Vqe => "vqe",
            ExperimentKind::Qcbm => "qcbm",
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::Gradcheck => "gradcheck",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Replaces the built-in ansatz; the file must carry an `input` state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<PathBuf>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub optimizers: Vec<OptimizerConfig>,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Shared starting point; uniform in `[0, 2π)` per repetition when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vqe: Option<VqeSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qcbm: Option<QcbmSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradcheck: Option<GradCheckSettings>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqeSettings {
    #[serde(default = "default_h2_terms")]
    pub hamiltonian: Vec<PauliTerm>,
}

impl Default for VqeSettings {
    fn default() -> Self {
        VqeSettings {
            hamiltonian: default_h2_terms(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Kl,
    Mmd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSettings {
    #[serde(default = "default_means")]
    pub means: Vec<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_weights")]
    pub weights: Vec<f64>,
    /// Explicit probabilities over outcome indices; overrides the mixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

fn default_means() -> Vec<f64> {
    vec![30.0, 80.0]
}

fn default_sigma() -> f64 {
    8.0
}

fn default_weights() -> Vec<f64> {
    vec![0.5, 0.5]
}

impl Default for TargetSettings {
    fn default() -> Self {
        TargetSettings {
            means: default_means(),
            sigma: default_sigma(),
            weights: default_weights(),
            values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QcbmSettings {
    #[serde(default)]
    pub target: TargetSettings,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
}

fn default_loss() -> LossKind {
    LossKind::Kl
}

fn default_sigmas() -> Vec<f64> {
    MixtureKernel::DEFAULT_SIGMAS.to_vec()
}

impl Default for QcbmSettings {
    fn default() -> Self {
        QcbmSettings {
            target: TargetSettings::default(),
            loss: default_loss(),
            sigmas: default_sigmas(),
        }
    }
}

/// Grids; every combination becomes one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSettings {
    #[serde(default = "default_bound_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: Vec<f64>,
    #[serde(default = "default_failure")]
    pub failure: Vec<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: Vec<f64>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_bound_n() -> Vec<usize> {
    vec![4]
}

fn default_epsilon() -> Vec<f64> {
    vec![0.1]
}

fn default_delta() -> Vec<f64> {
    vec![0.01]
}

fn default_failure() -> Vec<f64> {
    vec![0.1]
}

fn default_lambda() -> Vec<f64> {
    vec![1.0]
}

fn default_n_max() -> usize {
    20
}

impl Default for BoundSettings {
    fn default() -> Self {
        BoundSettings {
            n: default_bound_n(),
            epsilon: default_epsilon(),
            delta: default_delta(),
            failure: default_failure(),
            lambda: default_lambda(),
            n_max: default_n_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradCheckSettings {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_max_photons")]
    pub max_photons: usize,
    #[serde(default = "default_max_modes")]
    pub max_modes: usize,
    #[serde(default = "default_max_components")]
    pub max_components: usize,
    /// Forces every instance to this photon number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photons: Option<usize>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_fd_tolerance")]
    pub fd_tolerance: f64,
    /// Seeds for the sampled concentration check (run when shots are finite).
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
}

fn default_instances() -> usize {
    50
}

fn default_max_photons() -> usize {
    3
}

fn default_max_modes() -> usize {
    6
}

fn default_max_components() -> usize {
    20
}

fn default_tolerance() -> f64 {
    1e-9
}

fn default_fd_tolerance() -> f64 {
    1e-5
}

fn default_seeds() -> usize {
    500
}

fn default_epsilons() -> Vec<f64> {
    vec![0.05, 0.1]
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        GradCheckSettings {
            instances: default_instances(),
            max_photons: default_max_photons(),
            max_modes: default_max_modes(),
            max_components: default_max_components(),
            photons: None,
            tolerance: default_tolerance(),
            fd_tolerance: default_fd_tolerance(),
            seeds: default_seeds(),
            epsilons: default_epsilons(),
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub exact: bool,
    pub shots: Option<u64>,
    pub hom: Option<f64>,
    pub repetitions: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            circuit: None,
            noise: NoiseModel::exact(),
            optimizers: Vec::new(),
            repetitions: 1,
            initial: None,
            vqe: None,
            qcbm: None,
            bounds: None,
            gradcheck: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates `path`; a relative circuit path resolves against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        if let (Some(c), Some(dir)) = (&cfg.circuit, path.parent()) {
            if c.is_relative() {
                cfg.circuit = Some(dir.join(c));
            }
        }
        cfg.check_files()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.noise.seed = s;
        }
        if o.exact {
            self.noise.shots = crate::sampling::Shots::Exact;
        }
        if let Some(n) = o.shots {
            self.noise.shots = crate::sampling::Shots::Finite(n);
        }
        if let Some(v) = o.hom {
            self.noise.hom_visibility = v;
        }
        if let Some(r) = o.repetitions {
            self.repetitions = r;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("repetitions must be positive".into()));
        }
        for o in &self.optimizers {
            o.validate()?;
        }
        let needs_optimizers = matches!(self.kind, ExperimentKind::Vqe | ExperimentKind::Qcbm);
        if needs_optimizers && self.optimizers.is_empty() {
            return Err(Error::InvalidArgument("no optimizers configured".into()));
        }
        let mut names: Vec<Method> = self.optimizers.iter().map(|o| o.method).collect();
        names.sort_by_key(|m| m.name());
        names.dedup();
        if names.len() != self.optimizers.len() {
            return Err(Error::InvalidArgument("each optimizer may appear once".into()));
        }
        Ok(())
    }

    fn check_files(&self) -> Result<()> {
        if let Some(path) = &self.circuit {
            crate::interferometer::ParamCircuit::load(path)?;
        }
        Ok(())
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_string(self).expect("config serializes").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
