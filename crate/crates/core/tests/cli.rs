use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use photongrad::experiments::ExperimentConfig;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photongrad"))
        .args(&args[..1])
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(&args[1..])
        .output()
        .unwrap()
}

fn small_config(name: &str, dir: &Path, iterations: usize, reps: usize) -> PathBuf {
    let mut cfg = ExperimentConfig::load(&configs().join(name)).unwrap();
    cfg.repetitions = reps;
    for o in &mut cfg.optimizers {
        o.max_iterations = iterations;
    }
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_pretty_json()).unwrap();
    path
}

/// Data rows of a CSV with a leading `#` provenance line.
fn rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    assert!(header.starts_with("# photongrad"), "{header}");
    lines.next();
    (
        header,
        lines.map(|l| l.split(',').map(String::from).collect()).collect(),
    )
}

#[test]
fn vqe_artifacts_are_consistent() {
    let work = tempfile::tempdir().unwrap();
    let config = small_config("vqe_n5000_v09.json", work.path(), 6, 3);
    let out = work.path().join("run");
    let o = run(&["vqe"], &config, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.json", "aggregate.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let hash = summary["provenance"]["config_hash"].as_str().unwrap().to_string();
    assert!((summary["oracle"].as_f64().unwrap() + 1.857_274_977).abs() < 1e-8);

    let (_, agg) = rows(&out.join("aggregate.csv"));
    for method in ["gd-psr", "gd-fd", "gd-spsa", "nelder-mead"] {
        let traces: Vec<Vec<f64>> = (0..3)
            .map(|r| {
                let (header, data) = rows(&out.join(format!("trace_{method}_{r}.csv")));
                assert!(header.contains(&hash));
                assert!(header.contains(&format!("optimizer={method} rep={r}")));
                // every circuit execution draws the configured shots
                for row in &data {
                    let shots: u64 = row[2].parse().unwrap();
                    let evals: u64 = row[3].parse().unwrap();
                    assert_eq!(shots, 5000 * evals, "{method}");
                }
                data.iter().map(|row| row[1].parse().unwrap()).collect()
            })
            .collect();
        let arm: Vec<&Vec<String>> = agg.iter().filter(|r| r[0] == method).collect();
        let len = traces.iter().map(Vec::len).max().unwrap();
        assert_eq!(arm.len(), len);
        for (i, row) in arm.iter().enumerate() {
            let at: Vec<f64> = traces.iter().map(|t| t[i.min(t.len() - 1)]).collect();
            let mean = at.iter().sum::<f64>() / 3.0;
            let std = (at.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
            assert!((row[2].parse::<f64>().unwrap() - mean).abs() < 1e-12);
            assert!((row[3].parse::<f64>().unwrap() - std).abs() < 1e-12);
        }
    }
}

#[test]
fn gradient_descent_cost_per_iteration() {
    let work = tempfile::tempdir().unwrap();
    let config = small_config("vqe_n5000_v1.json", work.path(), 4, 1);
    let out = work.path().join("run");
    assert!(run(&["vqe"], &config, &out).status.success());
    let per_iteration = |method: &str| {
        let (_, data) = rows(&out.join(format!("trace_{method}_0.csv")));
        let evals: Vec<u64> = data.iter().map(|r| r[3].parse().unwrap()).collect();
        evals.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>()
    };
    // 8 parameters, one photon in each shifter's cone before the gate and two
    // after, two measurement settings: 4 × 2 × 2 + 4 × 4 × 2
    assert!(per_iteration("gd-psr").iter().all(|&d| d == 48));
    assert!(per_iteration("gd-fd").iter().all(|&d| d == 8 * 2 * 2));
    assert!(per_iteration("gd-spsa").iter().all(|&d| d == 2 * 2));
}

#[test]
fn overrides_change_the_hash() {
    let work = tempfile::tempdir().unwrap();
    let config = configs().join("bounds_reference.json");
    let (a, b) = (work.path().join("a"), work.path().join("b"));
    assert!(run(&["bounds"], &config, &a).status.success());
    assert!(run(&["bounds", "--seed", "9"], &config, &b).status.success());
    let first = |p: &Path| {
        std::fs::read_to_string(p.join("bounds.csv"))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_ne!(first(&a), first(&b));
    let written = ExperimentConfig::load(&b.join("config.json")).unwrap();
    assert_eq!(written.noise.seed, 9);
}

#[test]
fn exit_codes() {
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out");

    let missing = run(&["vqe"], &work.path().join("absent.json"), &out);
    assert_eq!(missing.status.code(), Some(2));

    let wrong_kind = run(&["vqe"], &configs().join("bounds.json"), &out);
    assert_eq!(wrong_kind.status.code(), Some(2));

    let bad_hom = run(&["bounds", "--hom", "1.5"], &configs().join("bounds.json"), &out);
    assert_eq!(bad_hom.status.code(), Some(2));

    let strict = work.path().join("strict.json");
    std::fs::write(
        &strict,
        r#"{"kind": "gradcheck", "gradcheck": {"instances": 4, "max_photons": 2, "photons": 2, "tolerance": 0.0}}"#,
    )
    .unwrap();
    let breach = run(&["gradcheck"], &strict, &out);
    assert_eq!(breach.status.code(), Some(3));
    assert!(std::fs::read_dir(&out)
        .unwrap()
        .any(|e| e.unwrap().file_name().to_string_lossy().starts_with("failure_")));

    let missing_circuit = work.path().join("custom.json");
    std::fs::write(
        &missing_circuit,
        r#"{"kind": "vqe", "circuit": "nowhere.json", "optimizers": [{"method": "gd-psr"}]}"#,
    )
    .unwrap();
    assert_eq!(run(&["vqe"], &missing_circuit, &out).status.code(), Some(2));

    let starved = work.path().join("starved.json");
    std::fs::write(
        &starved,
        r#"{"kind": "vqe", "noise": {"hom": 1.0, "shots": 1, "seed": 0},
            "optimizers": [{"method": "gd-psr", "max_iterations": 2}]}"#,
    )
    .unwrap();
    let o = run(&["vqe"], &starved, &out);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("post-selection"));
}

#[test]
fn custom_circuit_file() {
    let work = tempfile::tempdir().unwrap();
    let circuit = work.path().join("mesh.json");
    std::fs::write(
        &circuit,
        r#"{"modes": 3, "input": [1, 1, 0], "components": [
            {"type": "bs", "modes": [0, 1], "eta": 0.7853981633974483},
            {"type": "ps", "mode": 1, "param": "a"},
            {"type": "bs", "modes": [1, 2], "eta": 0.6},
            {"type": "ps", "mode": 0, "param": "b"},
            {"type": "bs", "modes": [0, 1], "eta": 0.7853981633974483}]}"#,
    )
    .unwrap();
    let config = work.path().join("qcbm.json");
    std::fs::write(
        &config,
        r#"{"kind": "qcbm", "circuit": "mesh.json",
            "optimizers": [{"method": "gd-psr", "max_iterations": 20}],
            "qcbm": {"target": {"values": [0.1, 0.1, 0.2, 0.2, 0.2, 0.2]}}}"#,
    )
    .unwrap();
    let out = work.path().join("out");
    let o = run(&["qcbm"], &config, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, data) = rows(&out.join("trace_gd-psr_0.csv"));
    let first: f64 = data[0][1].parse().unwrap();
    let last: f64 = data.last().unwrap()[1].parse().unwrap();
    assert!(last < first);
    let hist = std::fs::read_to_string(out.join("histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 7);
}
