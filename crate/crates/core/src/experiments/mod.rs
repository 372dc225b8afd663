//! Experiment runners and the artifacts they write.

pub mod ansatz;
mod bounds;
pub mod config;
mod gradcheck;
pub mod hamiltonian;
mod variational;

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

pub use bounds::{run_bound_sweep, BoundSweep};
pub use config::{ExperimentConfig, ExperimentKind, Overrides};
pub use gradcheck::{run_grad_check, GradCheckReport, InstanceFailure};
pub use variational::{run_qcbm, run_vqe};

use crate::error::{Error, Result};
use crate::optimizers::{Method, OptimizationTrace, Termination};
use crate::sampling::Shots;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identifies the code and inputs behind a set of files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
    pub hom: f64,
    pub shots: Shots,
}

impl Provenance {
    pub fn of(config: &ExperimentConfig) -> Self {
        Provenance {
            version: VERSION.to_string(),
            kind: config.kind,
            config_hash: config.hash(),
            seed: config.noise.seed,
            hom: config.noise.hom_visibility,
            shots: config.noise.shots,
        }
    }

    fn comment(&self) -> String {
        let shots = match self.shots {
            Shots::Exact => "exact".to_string(),
            Shots::Finite(n) => n.to_string(),
        };
        format!(
            "# photongrad {} kind={} config_sha256={} seed={} hom={} shots={}",
            self.version,
            self.kind.name(),
            self.config_hash,
            self.seed,
            self.hom,
            shots
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionRun {
    pub optimizer: Method,
    pub repetition: usize,
    pub trace: OptimizationTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateRow {
    pub optimizer: Method,
    pub iteration: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerSummary {
    pub optimizer: Method,
    pub final_losses: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub best: f64,
    pub mean_shots: f64,
    pub terminations: Vec<Termination>,
}

/// Everything a variational experiment produces.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub runs: Vec<RepetitionRun>,
    pub aggregate: Vec<AggregateRow>,
    pub summaries: Vec<OptimizerSummary>,
    /// Ground-state energy for VQE; absent for QCBM.
    pub oracle: Option<f64>,
    /// Extra CSV tables by file name.
    pub tables: Vec<(String, String)>,
    pub wall_seconds: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-iteration mean and spread; a run that stopped early keeps its last loss.
pub fn aggregate(runs: &[RepetitionRun], order: &[Method]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &method in order {
        let arm: Vec<Vec<f64>> = runs
            .iter()
            .filter(|r| r.optimizer == method)
            .map(|r| r.trace.losses())
            .collect();
        let len = arm.iter().map(Vec::len).max().unwrap_or(0);
        for iteration in 0..len {
            let at: Vec<f64> = arm.iter().map(|l| l[iteration.min(l.len() - 1)]).collect();
            let (mean, std) = mean_std(&at);
            rows.push(AggregateRow {
                optimizer: method,
                iteration,
                mean,
                std,
            });
        }
    }
    rows
}

fn summarize(runs: &[RepetitionRun], order: &[Method]) -> Vec<OptimizerSummary> {
    order
        .iter()
        .map(|&method| {
            let arm: Vec<&RepetitionRun> = runs.iter().filter(|r| r.optimizer == method).collect();
            let final_losses: Vec<f64> = arm.iter().map(|r| r.trace.final_record().loss).collect();
            let (mean, std) = mean_std(&final_losses);
            let shots: Vec<f64> = arm
                .iter()
                .map(|r| r.trace.final_record().shots_cumulative as f64)
                .collect();
            OptimizerSummary {
                optimizer: method,
                best: final_losses.iter().copied().fold(f64::INFINITY, f64::min),
                final_losses,
                mean,
                std,
                mean_shots: mean_std(&shots).0,
                terminations: arm.iter().map(|r| r.trace.termination.clone()).collect(),
            }
        })
        .collect()
}

impl RunArtifact {
    pub fn summary(&self, method: Method) -> Option<&OptimizerSummary> {
        self.summaries.iter().find(|s| s.optimizer == method)
    }

    pub fn trace_file_name(run: &RepetitionRun) -> String {
        format!("trace_{}_{}.csv", run.optimizer, run.repetition)
    }

    pub fn trace_csv(&self, run: &RepetitionRun) -> String {
        format!(
            "{} optimizer={} rep={}\n{}",
            self.provenance.comment(),
            run.optimizer,
            run.repetition,
            run.trace.to_csv()
        )
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out = format!("{}\noptimizer,iteration,mean,std\n", self.provenance.comment());
        for r in &self.aggregate {
            let _ = writeln!(out, "{},{},{},{}", r.optimizer, r.iteration, r.mean, r.std);
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "provenance": self.provenance,
            "oracle": self.oracle,
            "optimizers": self.summaries,
            "wall_seconds": self.wall_seconds,
        })
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let mut files = vec![
            ("config.json".to_string(), self.config.to_pretty_json()),
            ("aggregate.csv".to_string(), self.aggregate_csv()),
            ("summary.json".to_string(), pretty(&self.summary_json())),
        ];
        for run in &self.runs {
            files.push((Self::trace_file_name(run), self.trace_csv(run)));
        }
        files.extend(self.tables.iter().cloned());
        write_files(dir, &files)
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

pub(crate) fn write_files(dir: &Path, files: &[(String, String)]) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("cannot write to {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::TraceRecord;

    fn run(method: Method, repetition: usize, losses: &[f64]) -> RepetitionRun {
        RepetitionRun {
            optimizer: method,
            repetition,
            trace: OptimizationTrace {
                method,
                records: losses
                    .iter()
                    .enumerate()
                    .map(|(i, &loss)| TraceRecord {
                        iteration: i,
                        loss,
                        shots_cumulative: 0,
                        evaluations_cumulative: 0,
                        theta: vec![],
                        wall_seconds: 0.0,
                    })
                    .collect(),
                termination: Termination::MaxIterations,
            },
        }
    }

    #[test]
    fn aggregate_carries_short_runs_forward() {
        let runs = vec![
            run(Method::GdPsr, 0, &[4.0, 2.0, 1.0]),
            run(Method::GdPsr, 1, &[2.0, 0.0]),
            run(Method::NelderMead, 0, &[1.0]),
        ];
        let rows = aggregate(&runs, &[Method::GdPsr, Method::NelderMead]);
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].mean, rows[0].std), (3.0, 1.0));
        assert_eq!((rows[2].mean, rows[2].std), (0.5, 0.5));
        assert_eq!(rows[3].optimizer, Method::NelderMead);
        let s = summarize(&runs, &[Method::GdPsr]);
        assert_eq!(s[0].final_losses, vec![1.0, 0.0]);
        assert_eq!(s[0].best, 0.0);
    }
}
