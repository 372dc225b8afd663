use std::fmt::Write as _;
use std::path::Path;

use super::config::{ExperimentConfig, ExperimentKind};
use super::{pretty, write_files, Provenance};
use crate::error::{Error, Result};
use crate::shift_rules::{coefficient_norm_scaling, hoeffding_report, HoeffdingReport, NormScaling};

/// Sample counts over the configured grid, plus the coefficient-norm growth table.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSweep {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub reports: Vec<HoeffdingReport>,
    pub scaling: NormScaling,
}

pub fn run_bound_sweep(config: &ExperimentConfig) -> Result<BoundSweep> {
    config.validate()?;
    if config.kind != ExperimentKind::Bounds {
        return Err(Error::InvalidArgument(format!(
            "config is for `{}`, not `bounds`",
            config.kind.name()
        )));
    }
    let s = config.bounds.clone().unwrap_or_default();
    let mut reports = Vec::new();
    for &n in &s.n {
        for &epsilon in &s.epsilon {
            for &delta in &s.delta {
                for &failure in &s.failure {
                    for &lambda in &s.lambda {
                        reports.push(hoeffding_report(n, epsilon, delta, failure, lambda)?);
                    }
                }
            }
        }
    }
    Ok(BoundSweep {
        config: config.clone(),
        provenance: Provenance::of(config),
        reports,
        scaling: coefficient_norm_scaling(s.n_max)?,
    })
}

impl BoundSweep {
    pub fn bounds_csv(&self) -> String {
        let mut out = format!("{}\n{}\n", self.provenance.comment(), HoeffdingReport::CSV_HEADER);
        for r in &self.reports {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn scaling_csv(&self) -> String {
        let mut out = format!("{}\nn,coefficient_norm_squared\n", self.provenance.comment());
        for (n, v) in &self.scaling.rows {
            let _ = writeln!(out, "{n},{v}");
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "provenance": self.provenance,
            "reports": self.reports,
            "alpha": self.scaling.alpha,
        })
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        write_files(
            dir,
            &[
                ("config.json".to_string(), self.config.to_pretty_json()),
                ("bounds.csv".to_string(), self.bounds_csv()),
                ("scaling.csv".to_string(), self.scaling_csv()),
                ("summary.json".to_string(), pretty(&self.summary_json())),
            ],
        )
    }
}
