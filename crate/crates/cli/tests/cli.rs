use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cohthermo"))
}

fn run(config: &Path, out: &Path, workers: usize) -> std::process::Output {
    bin()
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--workers", &workers.to_string()])
        .output()
        .unwrap()
}

fn write_config(dir: &TempDir, text: &str) -> std::path::PathBuf {
    let path = dir.path().join("run.cfg");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn qubit_sweep_is_byte_reproducible_across_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "experiment = qubit-sweep\nseed = 9\nsamples = 2000\nqubit.tau = 0.5:4:0.5\nqubit.time_samples = 3\n",
    );
    let mut reports = Vec::new();
    for (i, workers) in [1, 4, 4].into_iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let o = run(&cfg, &out, workers);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        reports.push((
            fs::read(out.join("report.csv")).unwrap(),
            fs::read(out.join("fluctuation.csv")).unwrap(),
        ));
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[1], reports[2]);
    let text = String::from_utf8(reports[0].0.clone()).unwrap();
    assert!(text.starts_with("# schema=1\npoint,omega_i,"));
    // 8 taus x 3 time samples
    assert_eq!(text.lines().count(), 2 + 24);
}

#[test]
fn rotor_sweep_is_byte_reproducible_across_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "experiment = rotor-sweep\nrotor.k = 4, 6\nrotor.temperature = 0.5\nrotor.kicks = 200\nrotor.window_start = 100\nrotor.window_end = 200\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&cfg, &a, 1).status.success());
    assert!(run(&cfg, &b, 4).status.success());
    for file in ["report.csv", "saturation.csv", "fluctuation.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn identity_demo_is_trivial() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "experiment = identity-demo\nidentity.dim = 5\n");
    let out = dir.path().join("out");
    assert!(run(&cfg, &out, 2).status.success());
    let text = fs::read_to_string(out.join("fluctuation.csv")).unwrap();
    let row: Vec<f64> = text
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .skip(4)
        .take(6)
        .map(|v| v.parse().unwrap())
        .collect();
    for (v, target) in row.iter().zip([0.0, 0.0, 0.0, 1.0, 1.0, 1.0]) {
        assert!((v - target).abs() < 1e-14, "{row:?}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outcome"], "ok");
    assert_eq!(manifest["points"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["points"][0]["status"], "ok");
    assert!(out.join("histogram_0.csv").exists());
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "experiment = qubit-sweep\nqubit.tau = -1\n");
    let o = run(&cfg, &dir.path().join("out"), 1);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("qubit.tau"));
}

#[test]
fn numerical_failure_exits_with_3_and_lists_the_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "experiment = rotor-sweep\nrotor.k = 0.5, 9.5\nrotor.temperature = 0.5\nrotor.kicks = 150\nrotor.window_start = 50\nrotor.window_end = 150\nrotor.tpm_cutoff = 8\n",
    );
    let out = dir.path().join("out");
    let o = run(&cfg, &out, 1);
    assert_eq!(o.status.code(), Some(3));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outcome"], "invariant-breach");
    assert_eq!(manifest["points"][0]["status"], "ok");
    assert_eq!(manifest["points"][1]["status"], "failed");
    assert!(manifest["points"][1]["message"].as_str().unwrap().contains("cutoff"));
}

#[test]
fn environment_overrides_config_keys() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "experiment = qubit-sweep\nqubit.tau = 1\n");
    let out = dir.path().join("out");
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("COHTHERMO_QUBIT_TAU", "1, 2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn check_command_passes() {
    let o = bin().arg("check").output().unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
}
