use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const PASSING: &str = "command = \"verify-identities\"\nm = 5\ndims = [5, 6]\n\
                       [conventions]\nlock_a = \"verified\"\nfourth_moment = \"isotropic\"\n";

fn blab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blab"))
        .args(args)
        .env("BLAB_LOG", "error")
        .output()
        .expect("spawn blab")
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run(dir: &TempDir, text: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = write_config(dir, text);
    let mut args = vec!["verify-identities", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    blab(&args)
}

#[test]
fn passing_suite_exits_zero_and_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run(&dir, PASSING, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("checks passed"));
    assert!(!stdout.contains("[FAIL]"));
    for f in ["summary.json", "bubble_profile.csv", "bubble_profile.svg", "moments.csv", "bubble_residuals.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["schema"], "blab.summary/1");
    assert_eq!(v["command"], "verify-identities");
    assert_eq!(v["pass"], true);
    assert!(v["checks"].as_array().unwrap().len() > 20);
}

#[test]
fn failing_checks_exit_one() {
    // the printed lock target is off by a factor two
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run(&dir, "m = 5\ndims = [5]\n", &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[FAIL] reduced_energy::lock_a_weighted_second_moment"));
    assert!(out.join("summary.json").exists());
}

#[test]
fn summary_is_deterministic_across_runs_and_workers() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(&dir, PASSING, &a, &["--workers", "1", "--seed", "3"]).status.code(), Some(0));
    assert_eq!(run(&dir, PASSING, &b, &["--workers", "4", "--seed", "3"]).status.code(), Some(0));
    for f in ["summary.json", "moments.csv", "bubble_profile.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    for bad in [
        "m = [",
        "m = 2",
        "unknown_key = 1",
        "[tolerances]\nt_rel = 0.0",
        "eps_ladder = [0.001, 0.01]",
        "command = \"reduce\"",
    ] {
        let o = run(&dir, bad, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "config {bad:?}");
        assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    }
    // bad command line
    assert_eq!(blab(&["verify-identities"]).status.code(), Some(2));
    assert_eq!(blab(&["frobnicate", "--config", "x.toml"]).status.code(), Some(2));
    assert_eq!(blab(&["reduce", "--config", "x.toml", "--seed", "minus-one"]).status.code(), Some(2));
}

#[test]
fn io_errors_exit_three() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.toml");
    let o = blab(&["verify-identities", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    // output directory blocked by a regular file
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    let o = run(&dir, PASSING, &blocker.join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn help_and_version_exit_zero() {
    let o = blab(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for c in ["verify-identities", "fit-expansion", "reduce", "continuation"] {
        assert!(text.contains(c), "help lacks {c}");
    }
    assert_eq!(blab(&["--version"]).status.code(), Some(0));
}

#[test]
fn output_dir_from_config_is_used() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("from-config");
    let text = format!("output_dir = {:?}\n{PASSING}", target.to_str().unwrap());
    let cfg = write_config(&dir, &text);
    let o = blab(&["verify-identities", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(target.join("summary.json").exists());
}
