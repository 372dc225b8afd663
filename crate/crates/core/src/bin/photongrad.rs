use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use photongrad::experiments::{
    run_bound_sweep, run_grad_check, run_qcbm, run_vqe, ExperimentConfig, ExperimentKind, Overrides,
};
use photongrad::Error;

const CONFIG_ERROR: u8 = 2;
const TOLERANCE_BREACH: u8 = 3;
const RUNTIME_FAILURE: u8 = 4;

/// Simulate photonic circuits and compare gradient estimators.
///
/// Set PHOTONGRAD_THREADS to fix the worker count.
#[derive(Parser)]
#[command(name = "photongrad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state search on a dual-rail Hamiltonian.
    Vqe(RunArgs),
    /// Born-machine training against a target distribution.
    Qcbm(RunArgs),
    /// Sample-count bounds for shift-rule and finite-difference estimators.
    Bounds(RunArgs),
    /// Random-instance comparison of gradients against exact oracles.
    Gradcheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Infinite-shot estimates.
    #[arg(long, conflicts_with = "shots")]
    exact: bool,
    #[arg(long)]
    shots: Option<u64>,
    /// HOM visibility in [0, 1].
    #[arg(long)]
    hom: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("photongrad: {message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("PHOTONGRAD_THREADS") {
        let Ok(n) = threads.parse::<usize>() else {
            return fail(CONFIG_ERROR, format!("PHOTONGRAD_THREADS={threads:?} is not a number"));
        };
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(RUNTIME_FAILURE, e);
        }
    }
    let (kind, args) = match &cli.command {
        Command::Vqe(a) => (ExperimentKind::Vqe, a),
        Command::Qcbm(a) => (ExperimentKind::Qcbm, a),
        Command::Bounds(a) => (ExperimentKind::Bounds, a),
        Command::Gradcheck(a) => (ExperimentKind::Gradcheck, a),
    };
    let mut config = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    if config.kind != kind {
        return fail(
            CONFIG_ERROR,
            format!(
                "{} describes a `{}` experiment",
                args.config.display(),
                config.kind.name()
            ),
        );
    }
    let overrides = Overrides {
        seed: args.seed,
        exact: args.exact,
        shots: args.shots,
        hom: args.hom,
        repetitions: args.reps,
    };
    if let Err(e) = config.apply(&overrides) {
        return fail(CONFIG_ERROR, e);
    }
    let runtime = |e: Error| fail(RUNTIME_FAILURE, e);
    match kind {
        ExperimentKind::Vqe | ExperimentKind::Qcbm => {
            let run = if kind == ExperimentKind::Vqe {
                run_vqe(&config)
            } else {
                run_qcbm(&config)
            };
            let artifact = match run.and_then(|a| a.write_to(&args.out).map(|_| a)) {
                Ok(a) => a,
                Err(e) => return runtime(e),
            };
            if let Some(oracle) = artifact.oracle {
                println!("oracle {oracle}");
            }
            for s in &artifact.summaries {
                println!("{} final mean {} std {}", s.optimizer, s.mean, s.std);
            }
        }
        ExperimentKind::Bounds => {
            let sweep = match run_bound_sweep(&config).and_then(|s| s.write_to(&args.out).map(|_| s)) {
                Ok(s) => s,
                Err(e) => return runtime(e),
            };
            for r in &sweep.reports {
                println!(
                    "n={} eps={} delta={} failure={} lambda={}: N_psr={:.0} N_fd={:.0} ratio={:.1}",
                    r.n, r.epsilon, r.delta, r.failure, r.lambda, r.n_psr, r.n_fd, r.ratio
                );
            }
            println!("alpha {}", sweep.scaling.alpha);
        }
        ExperimentKind::Gradcheck => {
            let report = match run_grad_check(&config).and_then(|r| r.write_to(&args.out).map(|_| r)) {
                Ok(r) => r,
                Err(e) => return runtime(e),
            };
            print!("{}", report.report_csv());
            if !report.passed() {
                return fail(
                    TOLERANCE_BREACH,
                    format!("tolerance breach, see {}", args.out.join("report.csv").display()),
                );
            }
        }
    }
    ExitCode::SUCCESS
}
