use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn bitalloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bitalloc")).args(args).output().unwrap()
}

fn small_plan(dir: &Path) -> String {
    let path = dir.join("plan.toml");
    fs::write(
        &path,
        r#"
kind = "grid-laplacian"
d = 6
m = 6
seed = 3
trials = 2
"#,
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn rounding_gap_writes_csv_outputs() {
    let dir = tempdir().unwrap();
    let plan = small_plan(dir.path());
    let out = dir.path().join("out");
    let o = bitalloc(&["rounding-gap", "--config", &plan, "--out", out.to_str().unwrap(), "--solver", "barrier"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trials = fs::read_to_string(out.join("rounding-gap_trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 3);
    assert!(trials.starts_with("experiment,"));
    assert!(out.join("rounding-gap_summary.csv").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("gap_ratio"));
}

#[test]
fn solve_writes_a_trace() {
    let dir = tempdir().unwrap();
    let plan = small_plan(dir.path());
    let out = dir.path().join("out");
    let o = bitalloc(&["solve", "--config", &plan, "--out", out.to_str().unwrap(), "--solver", "fw", "--trials", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(out.join("solve_trace.jsonl")).unwrap();
    assert!(trace.lines().count() > 1);
    assert!(trace.lines().all(|l| l.starts_with('{')));
}

/// Trial rows with the timing columns removed.
fn untimed_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| {
            l.split(',')
                .zip(&header)
                .filter(|(_, h)| !h.ends_with("seconds"))
                .map(|(f, _)| f.to_owned())
                .collect()
        })
        .collect()
}

#[test]
fn runs_repeat_exactly_and_follow_the_seed() {
    let dir = tempdir().unwrap();
    let plan = small_plan(dir.path());
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = bitalloc(&["compare", "--config", &plan, "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        untimed_rows(&out.join("compare_trials.csv"))
    };
    let first = run("5", "a");
    assert_eq!(first, run("5", "b"));
    assert_ne!(first, run("6", "c"));
}

#[test]
fn missing_config_exits_with_one() {
    let dir = tempdir().unwrap();
    let o = bitalloc(&["compare", "--config", "/nonexistent/plan.toml", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("plan.toml"));
}

#[test]
fn invalid_plan_exits_with_one() {
    let dir = tempdir().unwrap();
    let plan = small_plan(dir.path());
    let o = bitalloc(&["compare", "--config", &plan, "--trials", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = bitalloc(&["optimize"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}
