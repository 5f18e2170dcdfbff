use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use varlasso::experiments::ExperimentConfig;
use varlasso::strategy_a::{tune_fixed_point, FixedPointConfig};
use varlasso::{DesignMatrix, Observation};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_varlasso"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn varlasso")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn fixture_args<'a>(design: &'a str, obs: &'a str) -> Vec<&'a str> {
    vec!["--design", design, "--obs", obs]
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "solve",
        "tune-a",
        "tune-b",
        "mc",
        "constants",
        "check-matrix",
    ] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["solve", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_matches_golden_fixture() {
    let dir = fixtures();
    let design = dir.join("design.csv");
    let obs = dir.join("obs.json");
    let golden: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("solve_lambda0.5.json")).unwrap())
            .unwrap();
    let expected: Vec<f64> = golden["beta"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();

    for solver in ["path", "cd"] {
        let mut args = vec!["solve", "--lambda", "0.5", "--solver", solver];
        args.extend(fixture_args(
            design.to_str().unwrap(),
            obs.to_str().unwrap(),
        ));
        let out = run(&args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let sol = stdout_json(&out);
        for key in [
            "beta",
            "lambda",
            "active_set",
            "signs",
            "residual",
            "objective",
            "kkt",
        ] {
            assert!(sol.get(key).is_some(), "solution lacks {key}");
        }
        let dim = sol["beta"]["dim"].as_u64().unwrap() as usize;
        let mut dense = vec![0.0; dim];
        let idx = sol["beta"]["indices"].as_array().unwrap();
        let vals = sol["beta"]["values"].as_array().unwrap();
        for (i, v) in idx.iter().zip(vals) {
            dense[i.as_u64().unwrap() as usize] = v.as_f64().unwrap();
        }
        for (a, b) in dense.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-8, "{solver}: {a} vs {b}");
        }
        let objective = golden["objective"].as_f64().unwrap();
        assert!((sol["objective"].as_f64().unwrap() - objective).abs() < 1e-9);
        assert!(sol["kkt"]["max_active_violation"].as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn solve_exports_path_csv() {
    let dir = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("path.csv");
    let design = dir.join("design.csv");
    let obs = dir.join("obs.json");
    let out = run(&[
        "solve",
        "--design",
        design.to_str().unwrap(),
        "--obs",
        obs.to_str().unwrap(),
        "--lambda",
        "0.5",
        "--path-csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("segment,lambda_hi,lambda_lo,active,signs")
    );
    assert!(lines.count() >= 2);
}

#[test]
fn tune_a_is_a_thin_adapter() {
    let dir = fixtures();
    let design = dir.join("design.csv");
    let obs_path = dir.join("obs.json");
    let out = run(&[
        "tune-a",
        "--design",
        design.to_str().unwrap(),
        "--obs",
        obs_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let x = DesignMatrix::load(&design, false).unwrap();
    let obs = Observation::load(&obs_path).unwrap();
    let lib = tune_fixed_point(&x, &obs.y, 8.0, &FixedPointConfig::default()).unwrap();
    let expected = serde_json::to_string_pretty(&lib).unwrap() + "\n";
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
}

#[test]
fn tune_b_methods_agree_on_fixture() {
    let dir = fixtures();
    let design = dir.join("design.csv");
    let obs = dir.join("obs.json");
    let lambda = |method: &str| {
        let out = run(&[
            "tune-b",
            "--design",
            design.to_str().unwrap(),
            "--obs",
            obs.to_str().unwrap(),
            "--c",
            "0.1",
            "--method",
            method,
        ]);
        assert_eq!(out.status.code(), Some(0));
        stdout_json(&out)["lambda_hat"].as_f64().unwrap()
    };
    let (a, b) = (lambda("path"), lambda("newton"));
    assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
}

#[test]
fn unattainable_constant_is_numerical_failure() {
    let dir = fixtures();
    let design = dir.join("design.csv");
    let obs = dir.join("obs.json");
    let out = run(&[
        "tune-b",
        "--design",
        design.to_str().unwrap(),
        "--obs",
        obs.to_str().unwrap(),
        "--c",
        "1e9",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let diag: Value = stderr
        .lines()
        .find_map(|l| serde_json::from_str(l).ok())
        .expect("diagnostic JSON on stderr");
    assert_eq!(diag["error"], "numerical");
    assert_eq!(diag["kind"], "root_not_attainable");
}

#[test]
fn every_run_prints_resolved_config() {
    let out = run(&["constants", "--n", "75", "--p", "600", "--s", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .find_map(|l| l.strip_prefix("resolved config: "))
        .expect("resolved config line");
    let cfg: Value = serde_json::from_str(line).unwrap();
    assert_eq!(cfg["command"]["constants"]["p"], 600);
}

#[test]
fn constants_reports_published_values() {
    let out = run(&["constants", "--n", "75", "--p", "600", "--s", "9"]);
    let v = stdout_json(&out);
    assert_eq!(v["c_mu"].as_f64().unwrap(), 0.2);
    let c_spar = v["c_spar"].as_f64().unwrap();
    assert!((c_spar - 0.25 / (2.5 * std::f64::consts::E.powi(2))).abs() < 1e-15);
    assert!(v["assumptions"].is_null());
}

#[test]
fn constants_with_design_and_truth_reports_assumptions() {
    let dir = fixtures();
    let out = run(&[
        "constants",
        "--s",
        "2",
        "--design",
        dir.join("design.csv").to_str().unwrap(),
        "--truth",
        dir.join("truth.json").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert_eq!(v["opnorm_source"], "design");
    assert_eq!(v["assumptions"]["a"]["strategy"], "a");
    assert!(v["assumptions"]["b"]["beta_upper_ok"].is_object());
}

#[test]
fn check_matrix_matches_library() {
    let design = fixtures().join("design.csv");
    let out = run(&[
        "check-matrix",
        "--design",
        design.to_str().unwrap(),
        "--support",
        "3,7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let x = DesignMatrix::load(&design, false).unwrap();
    assert_eq!(v["coherence"].as_f64().unwrap(), x.coherence());
    let dev = varlasso::oracle::isometry_deviation(&x, &[3, 7]).unwrap();
    assert_eq!(v["isometry_deviation"].as_f64().unwrap(), dev);
}

#[test]
fn generate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run(&[
            "--seed",
            "11",
            "generate",
            "--n",
            "10",
            "--p",
            "20",
            "--s",
            "3",
            "--magnitude",
            "5",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for file in ["design.csv", "truth.json", "obs.json"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
}

const SMALL_TOML: &str = r#"
p = 30
n = 15
s = 2
B = 20.0
sigma = 1.0
trials = 4
master_seed = 5
record_timing = false

[[estimators]]
kind = "lasso_known"

[[estimators]]
kind = "strategy_a"
cvar = 8.0

[[estimators]]
kind = "strategy_b"
c = 0.1
"#;

#[test]
fn mc_writes_csv_and_json() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("mc.toml");
    std::fs::write(&config, SMALL_TOML).unwrap();

    let csv_dir = tmp.path().join("csv");
    let out = run(&[
        "--threads",
        "2",
        "mc",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trials = std::fs::read_to_string(csv_dir.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 5);
    assert!(csv_dir.join("histograms.csv").exists());

    let json_dir = tmp.path().join("json");
    let out = run(&[
        "mc",
        "--config",
        config.to_str().unwrap(),
        "--out",
        json_dir.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(json_dir.join("report.json")).unwrap();
    let report: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["trials"].as_array().unwrap().len(), 4);

    let direct =
        varlasso::experiments::run_monte_carlo(&ExperimentConfig::parse(SMALL_TOML).unwrap())
            .unwrap();
    assert_eq!(text, serde_json::to_string_pretty(&direct).unwrap());
}

#[test]
fn malformed_config_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, SMALL_TOML.replace("trials = 4", "trials = 0")).unwrap();
    let out = run(&[
        "mc",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));

    std::fs::write(&config, SMALL_TOML.replace("sigma", "sigmaa")).unwrap();
    let out = run(&[
        "mc",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigmaa"));
}
