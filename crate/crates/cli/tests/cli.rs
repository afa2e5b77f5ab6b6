use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mlangevin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlangevin"))
        .current_dir(dir)
        .env_remove("MANIFOLD_LANGEVIN_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn body(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

const SMALL_SAMPLE: &str = "experiment = \"sample\"\nsteps = 50\nreps = 40\n";

#[test]
fn malformed_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "experiment = \"sample\"\nstepz = 3\n").unwrap();
    let out = mlangevin(dir.path(), &["sample", "--config", "bad.toml", "--out", "res"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"kind\":\"config\""), "{err}");
    assert!(!dir.path().join("res").exists() || fs::read_dir(dir.path().join("res")).unwrap().next().is_none());
}

#[test]
fn oversized_stepsize_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("big.toml"), format!("{SMALL_SAMPLE}stepsizes = [1.0]\n")).unwrap();
    let out = mlangevin(dir.path(), &["sample", "--config", "big.toml", "--out", "res"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stepsize-too-large"));
    assert!(!dir.path().join("res/sample.csv").exists());
}

#[test]
fn same_seed_gives_identical_bodies_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), SMALL_SAMPLE).unwrap();
    let a = mlangevin(dir.path(), &["sample", "--config", "s.toml", "--seed", "7", "--threads", "1", "--out", "a"]);
    let b = mlangevin(dir.path(), &["sample", "--config", "s.toml", "--seed", "7", "--threads", "3", "--out", "b"]);
    let c = mlangevin(dir.path(), &["sample", "--config", "s.toml", "--seed", "8", "--out", "c"]);
    assert!(a.status.success() && b.status.success() && c.status.success());
    let (ba, bb, bc) = (body(&dir.path().join("a/sample.csv")), body(&dir.path().join("b/sample.csv")), body(&dir.path().join("c/sample.csv")));
    assert_eq!(ba, bb);
    assert_ne!(ba, bc);
    assert!(fs::read_to_string(dir.path().join("a/sample.csv")).unwrap().contains("# seed: 7"));
}

#[test]
fn env_var_sets_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), SMALL_SAMPLE).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mlangevin"))
        .current_dir(dir.path())
        .env("MANIFOLD_LANGEVIN_OUT", "from-env")
        .args(["sample", "--config", "s.toml"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/sample.csv").exists());
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), SMALL_SAMPLE).unwrap();
    let out = mlangevin(dir.path(), &["sgld", "--config", "s.toml", "--out", "res"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"kind\":\"config\""));
}

#[test]
fn summarize_reports_empty_files_as_no_data() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = mlangevin(dir.path(), &["summarize", "empty.csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("NO DATA"));
}

#[test]
fn w1_between_sample_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), SMALL_SAMPLE).unwrap();
    for (seed, out) in [("1", "a"), ("2", "b")] {
        assert!(mlangevin(dir.path(), &["sample", "--config", "s.toml", "--seed", seed, "--out", out]).status.success());
    }
    let same = mlangevin(dir.path(), &["w1", "a/sample.csv", "a/sample.csv", "--out", "w"]);
    assert_eq!(String::from_utf8_lossy(&same.stdout).trim().parse::<f64>().unwrap(), 0.0);
    let diff = mlangevin(dir.path(), &["w1", "a/sample.csv", "b/sample.csv", "--out", "w"]);
    let v: f64 = String::from_utf8_lossy(&diff.stdout).trim().parse().unwrap();
    assert!(v > 0.0 && v < std::f64::consts::PI);
    let assignment = fs::read_to_string(dir.path().join("w/w1-assignment.csv")).unwrap();
    assert_eq!(assignment.lines().filter(|l| !l.starts_with('#')).count(), 41);
}

#[test]
fn lemma_check_writes_a_passing_summary() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("l.toml"), "experiment = \"lemma-check\"\ntrials = 50\n").unwrap();
    let out = mlangevin(dir.path(), &["lemma-check", "triangle", "--config", "l.toml", "--out", "res"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("res/lemma-check-triangle.csv");
    let sum = mlangevin(dir.path(), &["summarize", path.to_str().unwrap()]);
    assert!(sum.status.success());
    let text = String::from_utf8_lossy(&sum.stdout);
    assert!(text.contains("PASS") && !text.contains("FAIL"), "{text}");
}
