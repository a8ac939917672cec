use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use optrank::structured::kms;
use optrank::{AlgebraId, StructuredMatrix};
use optrank_cli::{load_build, CampaignConfig};

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optrank")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

const KMS_EXPLICIT: &str = r#"{
    "schema": 1,
    "matrix": {"type": "kms", "lambda": 0.5},
    "algebra": "circ:1",
    "method": "explicit",
    "sizes": [16, 32]
}"#;

#[test]
fn unsupported_combination_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"schema": 1, "matrix": {"type": "symbol", "symbol": {"variant": "kms_kappa", "lambda": 0.5}, "structure": "hankel"},
            "algebra": "hartley:1", "method": "explicit", "sizes": [8]}"#,
    );
    let o = run(&["build", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_config_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad_schema = write_config(dir.path(), "a.json", &KMS_EXPLICIT.replace("\"schema\": 1", "\"schema\": 7"));
    let unknown = write_config(dir.path(), "b.json", &KMS_EXPLICIT.replace("\"sizes\"", "\"colour\": 1, \"sizes\""));
    for cfg in [bad_schema, unknown] {
        let o = run(&["build", "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(3));
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("optrank:"));
    }
    let o = run(&["bench", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn identity_build_has_rank_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"schema": 1, "matrix": {"type": "identity"}, "algebra": "circ:1", "method": "blackdot", "sizes": [4, 9]}"#,
    );
    let out = dir.path().join("built.json");
    let o = run(&["build", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let built = load_build(&out).unwrap();
    for n in [4, 9] {
        let p = built.find(n).unwrap();
        assert_eq!(p.rank(), 0);
        assert!(p.d().iter().all(|z| (z - 1.0).norm() < 1e-12));
    }
}

#[test]
fn kms_build_eigenvalues_match_the_symbol() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", KMS_EXPLICIT);
    let out = dir.path().join("built.json");
    assert!(run(&["build", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let built = load_build(&out).unwrap();
    let lambda: f64 = 0.5;
    for n in [16usize, 32] {
        let p = built.find(n).unwrap();
        // kappa_lambda(theta) = (1 - lambda^2) / (1 - 2 lambda cos theta + lambda^2) on the grid
        let mut want: Vec<f64> = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (1.0 - lambda * lambda) / (1.0 - 2.0 * lambda * t.cos() + lambda * lambda)
            })
            .collect();
        let mut got: Vec<f64> = p.d().iter().map(|z| z.re).collect();
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
    }
}

#[test]
fn identity_bench_takes_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"schema": 1, "matrix": {"type": "identity"}, "algebra": "circ:1", "method": "none", "sizes": [4]}"#,
    );
    let o = run(&["bench", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    assert_eq!(csv_column(&csv, "iterations"), vec!["1"]);
    assert_eq!(csv_column(&csv, "converged"), vec!["true"]);
}

#[test]
fn loaded_preconditioners_reproduce_the_bench() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &KMS_EXPLICIT.replace("\"explicit\"", "\"blackdot\""));
    let built = dir.path().join("built.json");
    let c = cfg.to_str().unwrap();
    assert!(run(&["build", "--config", c, "--out", built.to_str().unwrap()]).status.success());
    let fresh = run(&["bench", "--config", c]);
    let loaded = run(&["bench", "--config", c, "--load", built.to_str().unwrap()]);
    assert!(fresh.status.success() && loaded.status.success());
    assert_eq!(csv_column(&stdout(&fresh), "iterations"), csv_column(&stdout(&loaded), "iterations"));
    assert_eq!(csv_column(&stdout(&fresh), "achieved_rank"), csv_column(&stdout(&loaded), "achieved_rank"));
}

#[test]
fn exact_preconditioner_spectrum_is_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", KMS_EXPLICIT);
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = stdout(&o);
    assert_eq!(csv.lines().next().unwrap(), "n,index,re,im");
    let re = csv_column(&csv, "re");
    let im = csv_column(&csv, "im");
    assert_eq!(re.len(), 16 + 32);
    for (r, i) in re.iter().zip(&im) {
        let (r, i): (f64, f64) = (r.parse().unwrap(), i.parse().unwrap());
        assert!((r - 1.0).abs() < 1e-8 && i.abs() < 1e-8);
    }
}

#[test]
fn config_defaults_are_filled_in() {
    let cfg = CampaignConfig::from_json(KMS_EXPLICIT).unwrap();
    assert_eq!(cfg.epsilon, 1e-8);
    assert_eq!(cfg.r_max, 64);
    assert!(cfg.control && !cfg.record_wall_time);
    assert_eq!(cfg.algebra_id().unwrap(), AlgebraId::circulant(1.0.into()).unwrap());
}

#[test]
fn explicit_toeplitz_input_is_accepted() {
    let a: StructuredMatrix = kms(6, 0.25).unwrap();
    let (col, row) = a.toeplitz_part().unwrap();
    let body = serde_json::json!({
        "schema": 1,
        "matrix": {"type": "toeplitz", "a": col, "b": row},
        "algebra": "trig:dct2",
        "method": "blackdot",
        "sizes": [6],
    });
    let cfg = CampaignConfig::from_json(&body.to_string()).unwrap();
    let (rows, failure) = optrank_cli::cmd_bench(&cfg, &Default::default(), Some(1), None).unwrap();
    assert!(failure.is_none());
    assert_eq!(rows[0].converged, Some(true));
}
