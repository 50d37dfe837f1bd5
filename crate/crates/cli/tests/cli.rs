//! End-to-end tests of the `reglab` binary: every subcommand, exit codes,
//! and the seed override.

use std::path::Path;
use std::process::{Command, Output};

fn reglab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reglab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_string_lossy().into_owned()
}

fn scenario_json(dir: &Path) -> serde_json::Value {
    serde_json::json!({
        "name": "cli-smoke",
        "system": {"kind": "integrator", "dim": 1},
        "controller": {"name": "example1-improved"},
        "schedule": {"generate": {
            "seed": 9, "n0": 2, "phi": 5.0,
            "targets": [{"theta": [0.0]}, {"theta": [1.0]}, {"theta": [-0.5]}]
        }},
        "x0": [1.0],
        "horizon": 300,
        "outputs": {
            "trace": dir.join("trace.csv").to_string_lossy(),
            "report": dir.join("report.json").to_string_lossy()
        },
        "analyses": {"regret": true, "certify": true, "bounds": true}
    })
}

#[test]
fn simulate_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "config.json",
        &scenario_json(dir.path()).to_string(),
    );
    let out = reglab(&["simulate", &cfg], dir.path());
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("trace.csv").exists());
    assert!(dir.path().join("report.json").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert!(report["bounds"]["report"]["total"]
        .as_f64()
        .unwrap()
        .is_finite());
}

#[test]
fn simulate_rejects_invalid_config_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad = scenario_json(dir.path());
    bad["x0"] = serde_json::json!([1.0, 2.0]);
    let cfg = write(dir.path(), "bad.json", &bad.to_string());
    let out = reglab(&["simulate", &cfg], dir.path());
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/x0"), "stderr: {stderr}");
}

#[test]
fn dwell_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let schedule = serde_json::json!({
        "horizon": 20,
        "segments": [
            {"start": 0, "theta": [0.0], "eta": [0.0], "p": 1, "q": 1.0, "r": 1.0},
            {"start": 5, "theta": [1.0], "eta": [0.0], "p": 1, "q": 1.0, "r": 1.0},
            {"start": 10, "theta": [0.5], "eta": [0.0], "p": 1, "q": 1.0, "r": 1.0},
            {"start": 15, "theta": [-1.0], "eta": [0.0], "p": 1, "q": 1.0, "r": 1.0}
        ]
    });
    let path = write(dir.path(), "schedule.json", &schedule.to_string());

    let pass = reglab(
        &["dwell-check", &path, "--n0", "2", "--phi", "5"],
        dir.path(),
    );
    assert!(pass.status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&pass.stdout)).unwrap();
    assert_eq!(parsed["ok"], serde_json::json!(true));

    // N0 = 1 with phi = 5 ties on [0, 15]: strict inequality fails
    let fail = reglab(
        &["dwell-check", &path, "--n0", "1", "--phi", "5"],
        dir.path(),
    );
    assert!(!fail.status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&fail.stdout)).unwrap();
    assert_eq!(parsed["ok"], serde_json::json!(false));
    assert!(parsed["violation"].is_object());
}

#[test]
fn verify_bounds_runs_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scenario_json(dir.path());
    cfg["analyses"] = serde_json::json!({});
    let path = write(dir.path(), "config.json", &cfg.to_string());
    let out = reglab(&["verify-bounds", &path], dir.path());
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    let margin = report["bounds"]["margin"].as_f64().unwrap();
    assert!(margin >= 0.0);
}

#[test]
fn sweep_writes_aggregate_and_handles_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "config.json",
        &scenario_json(dir.path()).to_string(),
    );
    let agg = dir.path().join("agg.csv");
    let out = reglab(
        &[
            "sweep",
            &cfg,
            "--axis",
            "/schedule/generate/phi",
            "--values",
            "5,6,8",
            "--out",
            agg.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(&agg).unwrap();
    assert_eq!(table.lines().count(), 4); // header + 3 rows
    assert!(table.lines().skip(1).all(|l| l.ends_with("pass")));

    // empty values: header-only aggregate, exit success
    let out = reglab(
        &[
            "sweep",
            &cfg,
            "--axis",
            "/schedule/generate/phi",
            "--values",
            "",
            "--out",
            agg.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let table = std::fs::read_to_string(&agg).unwrap();
    assert_eq!(table.lines().count(), 1);
}

#[test]
fn sweep_over_horizon_matches_harmonic_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "name": "baseline-horizons",
        "system": {"kind": "integrator", "dim": 1},
        "controller": {"name": "example1-baseline"},
        "schedule": {"inline": {
            "horizon": 2000,
            "segments": [{"start": 0, "theta": [0.0], "eta": "solve", "p": 1, "q": 1.0, "r": 1.0}]
        }},
        "x0": [1.0],
        "horizon": 2000,
        "analyses": {"regret": true}
    });
    let cfg_path = write(dir.path(), "config.json", &cfg.to_string());
    let agg = dir.path().join("agg.csv");
    let out = reglab(
        &[
            "sweep",
            &cfg_path,
            "--axis",
            "/horizon",
            "--values",
            "125,250,500,1000,2000",
            "--out",
            agg.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let table = std::fs::read_to_string(&agg).unwrap();
    for line in table.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let t: usize = fields[0].parse().unwrap();
        let regret: f64 = fields[1].parse().unwrap();
        let h_t: f64 = (1..=t).map(|k| 1.0 / k as f64).sum();
        let closed_form = 2.0 + h_t - 1.0 / (t as f64 + 1.0);
        assert!(
            (regret - closed_form).abs() <= 1e-9,
            "T={t}: {regret} vs {closed_form}"
        );
    }
}

#[test]
fn reproduce_example2_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = reglab(&["reproduce", "example2", "--out-dir", "repro"], dir.path());
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS] example2/constant-cost: spectral-envelope"));
    assert!(dir.path().join("repro/example2/switching.csv").exists());
    assert!(dir.path().join("repro/example2/switching.json").exists());
}

#[test]
fn seed_env_override_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write(
        dir.path(),
        "config.json",
        &scenario_json(dir.path()).to_string(),
    );

    let run = |label: &str, seed: &str| -> String {
        let report = dir.path().join(format!("report-{label}.json"));
        let mut doc = scenario_json(dir.path());
        doc["outputs"]["report"] = serde_json::json!(report.to_string_lossy());
        doc["outputs"]["trace"] = serde_json::json!(dir
            .path()
            .join(format!("trace-{label}.csv"))
            .to_string_lossy());
        std::fs::write(&cfg_path, doc.to_string()).unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_reglab"))
            .args(["simulate", cfg_path.as_str()])
            .env("REGLAB_SEED", seed)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read_to_string(dir.path().join(format!("trace-{label}.csv"))).unwrap()
    };

    let a = run("a", "777");
    let b = run("b", "777");
    let c = run("c", "778");
    assert_eq!(a, b, "same seed must give identical traces");
    assert_ne!(a, c, "different seed must change the generated schedule");
}
