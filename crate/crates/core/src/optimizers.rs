//! Gradient descent (shift rule, finite difference, SPSA) and Nelder–Mead drivers.
//!
//! Every optimizer sees only estimates drawn through the configured noise model.
//! The loss stored in a trace is the exact (infinite-shot) loss at the current
//! parameters, recorded for monitoring and never fed back to the optimizer.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::NoiseModel;
use crate::shift_rules::{spsa_estimate, SpsaGains};

/// Value and cost of one estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    /// Circuit executions.
    pub evaluations: usize,
    pub shots: u64,
}

impl std::ops::AddAssign for Evaluation {
    fn add_assign(&mut self, rhs: Self) {
        self.evaluations += rhs.evaluations;
        self.shots += rhs.shots;
    }
}

/// A loss that can be estimated under a noise model.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Estimate at `theta`; sampling draws from `noise`'s stream.
    fn loss(&self, theta: &[f64], noise: &NoiseModel) -> Result<Evaluation>;

    /// Shift-rule gradient and its total cost.
    fn psr_gradient(&self, theta: &[f64], noise: &NoiseModel) -> Result<(Vec<f64>, Evaluation)>;

    /// Infinite-shot loss under the same visibility.
    fn exact_loss(&self, theta: &[f64], noise: &NoiseModel) -> Result<f64> {
        self.loss(theta, &noise.without_shots()).map(|e| e.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "gd-psr")]
    GdPsr,
    #[serde(rename = "gd-fd")]
    GdFd,
    #[serde(rename = "gd-spsa")]
    GdSpsa,
    #[serde(rename = "nelder-mead")]
    NelderMead,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::GdPsr => "gd-psr",
            Method::GdFd => "gd-fd",
            Method::GdSpsa => "gd-spsa",
            Method::NelderMead => "nelder-mead",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimplexSettings {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub initial_step: f64,
}

impl Default for SimplexSettings {
    fn default() -> Self {
        SimplexSettings {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Stop once the loss improved by less than this over the last 10 iterations.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Derived from the learning rate and iteration budget when absent.
    #[serde(default)]
    pub spsa: Option<SpsaGains>,
    #[serde(default)]
    pub simplex: SimplexSettings,
}

fn default_learning_rate() -> f64 {
    0.4
}

fn default_max_iterations() -> usize {
    100
}

fn default_fd_step() -> f64 {
    0.01
}

pub const CONVERGENCE_WINDOW: usize = 10;

impl OptimizerConfig {
    pub fn new(method: Method) -> Self {
        OptimizerConfig {
            method,
            learning_rate: default_learning_rate(),
            max_iterations: default_max_iterations(),
            tolerance: None,
            fd_step: default_fd_step(),
            spsa: None,
            simplex: SimplexSettings::default(),
        }
    }

    pub fn spsa_gains(&self) -> SpsaGains {
        self.spsa
            .unwrap_or_else(|| SpsaGains::for_learning_rate(self.learning_rate, self.max_iterations))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "finite-difference step {}",
                self.fd_step
            )));
        }
        if self.simplex.initial_step == 0.0 || !self.simplex.initial_step.is_finite() {
            return Err(Error::InvalidArgument("degenerate initial simplex".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub loss: f64,
    pub shots_cumulative: u64,
    pub evaluations_cumulative: usize,
    pub theta: Vec<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    MaxIterations,
    Converged,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub method: Method,
    /// Record 0 is the starting point.
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
}

impl OptimizationTrace {
    /// Iterations performed (excluding the starting record).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_record(&self) -> &TraceRecord {
        self.records.last().expect("trace has a starting record")
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// CSV without timing, so reruns are byte-identical.
    pub fn to_csv(&self) -> String {
        let dim = self.records.first().map_or(0, |r| r.theta.len());
        let mut out = String::from("iteration,loss,shots_cumulative,evaluations_cumulative");
        for i in 0..dim {
            let _ = write!(out, ",theta_{i}");
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(
                out,
                "{},{},{},{}",
                r.iteration, r.loss, r.shots_cumulative, r.evaluations_cumulative
            );
            for t in &r.theta {
                let _ = write!(out, ",{t}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("trace serializes")
    }
}

struct Recorder<'a, O: ?Sized> {
    objective: &'a O,
    noise: NoiseModel,
    start: Instant,
    cost: Evaluation,
    trace: OptimizationTrace,
    tolerance: Option<f64>,
}

impl<'a, O: Objective + ?Sized> Recorder<'a, O> {
    fn new(objective: &'a O, method: Method, noise: &NoiseModel, tolerance: Option<f64>) -> Self {
        Recorder {
            objective,
            noise: *noise,
            start: Instant::now(),
            cost: Evaluation::default(),
            trace: OptimizationTrace {
                method,
                records: Vec::new(),
                termination: Termination::MaxIterations,
            },
            tolerance,
        }
    }

    /// Records `theta`; false once the run must stop.
    fn record(&mut self, iteration: usize, theta: &[f64]) -> Result<bool> {
        let loss = self.objective.exact_loss(theta, &self.noise)?;
        self.trace.records.push(TraceRecord {
            iteration,
            loss,
            shots_cumulative: self.cost.shots,
            evaluations_cumulative: self.cost.evaluations,
            theta: theta.to_vec(),
            wall_seconds: self.start.elapsed().as_secs_f64(),
        });
        if !loss.is_finite() {
            self.trace.termination = Termination::Aborted(Error::NonFiniteLoss { iteration }.to_string());
            return Ok(false);
        }
        if let Some(tol) = self.tolerance {
            let n = self.trace.records.len();
            if n > CONVERGENCE_WINDOW {
                let before = self.trace.records[n - 1 - CONVERGENCE_WINDOW].loss;
                if before - loss < tol {
                    self.trace.termination = Termination::Converged;
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Runs `config.method` from `theta0`. Iteration `k` draws from stream `k` of `noise`.
pub fn optimize<O: Objective + ?Sized>(
    objective: &O,
    theta0: &[f64],
    config: &OptimizerConfig,
    noise: &NoiseModel,
) -> Result<OptimizationTrace> {
    match config.method {
        Method::NelderMead => nelder_mead(objective, theta0, config, noise),
        _ => gradient_descent(objective, theta0, config, noise),
    }
}

/// Forward differences, two fresh estimates per parameter.
fn fd_gradient<O: Objective + ?Sized>(
    objective: &O,
    theta: &[f64],
    step: f64,
    noise: &NoiseModel,
) -> Result<(Vec<f64>, Evaluation)> {
    let parts = (0..theta.len())
        .into_par_iter()
        .map(|i| {
            let base = objective.loss(theta, &noise.reseeded(&[i as u64, 0]))?;
            let mut shifted = theta.to_vec();
            shifted[i] += step;
            let moved = objective.loss(&shifted, &noise.reseeded(&[i as u64, 1]))?;
            Ok(((moved.value - base.value) / step, base, moved))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cost = Evaluation::default();
    let grad = parts
        .into_iter()
        .map(|(g, a, b)| {
            cost += a;
            cost += b;
            g
        })
        .collect();
    Ok((grad, cost))
}

/// `θ ← θ − η ∇`, with `η = a_k` for SPSA.
pub fn gradient_descent<O: Objective + ?Sized>(
    objective: &O,
    theta0: &[f64],
    config: &OptimizerConfig,
    noise: &NoiseModel,
) -> Result<OptimizationTrace> {
    config.validate()?;
    noise.validate()?;
    check_dim(objective, theta0)?;
    if config.method == Method::NelderMead {
        return Err(Error::InvalidArgument("nelder-mead is not a gradient method".into()));
    }
    let gains = config.spsa_gains();
    let mut rec = Recorder::new(objective, config.method, noise, config.tolerance);
    let mut theta = theta0.to_vec();
    if !rec.record(0, &theta)? {
        return Ok(rec.trace);
    }
    for k in 0..config.max_iterations {
        let stream = noise.reseeded(&[k as u64]);
        let (grad, cost, rate) = match config.method {
            Method::GdPsr => {
                let (g, c) = objective.psr_gradient(&theta, &stream)?;
                (g, c, config.learning_rate)
            }
            Method::GdFd => {
                let (g, c) = fd_gradient(objective, &theta, config.fd_step, &stream)?;
                (g, c, config.learning_rate)
            }
            Method::GdSpsa => {
                let mut rng = stream.rng(&[u64::MAX]);
                let perturbation: Vec<f64> = (0..theta.len())
                    .map(|_| {
                        if rand::Rng::random_bool(&mut rng, 0.5) {
                            1.0
                        } else {
                            -1.0
                        }
                    })
                    .collect();
                let mut cost = Evaluation::default();
                let mut calls = 0u64;
                let g = spsa_estimate(&theta, &perturbation, gains.c_k(k), |t| {
                    let e = objective.loss(t, &stream.reseeded(&[calls]))?;
                    calls += 1;
                    cost += e;
                    Ok(e.value)
                })?;
                (g, cost, gains.a_k(k))
            }
            Method::NelderMead => unreachable!(),
        };
        rec.cost += cost;
        theta.iter_mut().zip(&grad).for_each(|(t, g)| *t -= rate * g);
        if !rec.record(k + 1, &theta)? {
            break;
        }
    }
    Ok(rec.trace)
}

fn check_dim<O: Objective + ?Sized>(objective: &O, theta0: &[f64]) -> Result<()> {
    if theta0.len() != objective.dim() {
        return Err(Error::ParameterCount {
            expected: objective.dim(),
            got: theta0.len(),
        });
    }
    if theta0.is_empty() {
        return Err(Error::InvalidArgument("no parameters to optimize".into()));
    }
    Ok(())
}

/// Downhill simplex. Evaluation `j` draws from stream `j` of `noise`.
pub fn nelder_mead<O: Objective + ?Sized>(
    objective: &O,
    theta0: &[f64],
    config: &OptimizerConfig,
    noise: &NoiseModel,
) -> Result<OptimizationTrace> {
    config.validate()?;
    noise.validate()?;
    check_dim(objective, theta0)?;
    let s = config.simplex;
    let d = theta0.len();
    let mut rec = Recorder::new(objective, Method::NelderMead, noise, config.tolerance);
    let mut calls = 0u64;
    let mut eval = |x: &[f64], rec: &mut Recorder<O>| -> Result<f64> {
        let e = objective.loss(x, &noise.reseeded(&[calls]))?;
        calls += 1;
        rec.cost += e;
        Ok(e.value)
    };

    let mut simplex: Vec<Vec<f64>> = vec![theta0.to_vec()];
    for i in 0..d {
        let mut v = theta0.to_vec();
        v[i] += s.initial_step;
        simplex.push(v);
    }
    let mut values = Vec::with_capacity(d + 1);
    for v in &simplex {
        values.push(eval(v, &mut rec)?);
    }
    if !rec.record(0, theta0)? {
        return Ok(rec.trace);
    }

    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    for k in 0..config.max_iterations {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|v| v[j]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        // c + t (c − worst)
        let reflected = lerp(&centroid, &worst, -s.reflection);
        let fr = eval(&reflected, &mut rec)?;
        let mut shrink = false;
        if fr < values[0] {
            let expanded = lerp(&centroid, &worst, -s.reflection * s.expansion);
            let fe = eval(&expanded, &mut rec)?;
            if fe < fr {
                simplex[d] = expanded;
                values[d] = fe;
            } else {
                simplex[d] = reflected;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = reflected;
            values[d] = fr;
        } else if fr < values[d] {
            let outside = lerp(&centroid, &reflected, s.contraction);
            let fc = eval(&outside, &mut rec)?;
            if fc <= fr {
                simplex[d] = outside;
                values[d] = fc;
            } else {
                shrink = true;
            }
        } else {
            let inside = lerp(&centroid, &worst, s.contraction);
            let fc = eval(&inside, &mut rec)?;
            if fc < values[d] {
                simplex[d] = inside;
                values[d] = fc;
            } else {
                shrink = true;
            }
        }
        if shrink {
            let best = simplex[0].clone();
            for i in 1..=d {
                simplex[i] = lerp(&best, &simplex[i], s.shrink);
                values[i] = eval(&simplex[i], &mut rec)?;
            }
        }
        let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        let theta = simplex[best].clone();
        if !rec.record(k + 1, &theta)? {
            break;
        }
    }
    Ok(rec.trace)
}
