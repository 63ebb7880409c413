use std::fs;

use bitalloc::bench::{loglog_slope, median, quantile};
use bitalloc::{run, Experiment, ExperimentPlan, FwStart, InstanceKind, InstanceSpec, PlanFile, SolverChoice};
use tempfile::tempdir;

fn small(experiment: Experiment) -> ExperimentPlan {
    let mut spec = InstanceSpec::new(InstanceKind::GridLaplacian, 6, 6);
    spec.seed = 40;
    let mut plan = ExperimentPlan::new(experiment, spec);
    plan.trials = 3;
    plan
}

#[test]
fn statistics_helpers() {
    assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
    let xs = [10.0, 100.0, 1000.0];
    let ys = [2.0, 20.0, 200.0];
    assert!((loglog_slope(&xs, &ys) - 1.0).abs() < 1e-12);
}

#[test]
fn trials_use_consecutive_seeds_in_order() {
    let out = run(&small(Experiment::RoundingGap)).unwrap();
    let seeds: Vec<u64> = out.trials.iter().map(|t| t.seed).collect();
    assert_eq!(seeds, vec![40, 41, 42]);
    assert!(out.trials.iter().all(|t| t.ok() && t.gap_ratio.is_some()));
    assert!(out.median("gap_ratio", "barrier", None).is_some());
}

#[test]
fn compare_records_relative_difference() {
    let mut plan = small(Experiment::CompareSolvers);
    plan.fw_start = FwStart::Uniform;
    plan.fw.max_iterations = 3000;
    plan.fw.step_rule = bitalloc::StepRule::AdaptiveLipschitz;
    let out = run(&plan).unwrap();
    assert_eq!(out.trials.len(), 6);
    for t in &out.trials {
        assert!(t.objective_rel_diff.unwrap() < 1e-2);
    }
}

#[test]
fn sweep_requires_values() {
    let plan = small(Experiment::UniformSweep);
    assert!(run(&plan).is_err());
}

#[test]
fn uniform_sweep_reports_improvement() {
    let mut plan = small(Experiment::UniformSweep);
    plan.sweep_values = Some(vec![2.0, 5.0]);
    let out = run(&plan).unwrap();
    assert_eq!(out.trials.len(), 6);
    for t in &out.trials { assert!(t.improvement_pct.is_some(), "{t:?}"); }
    assert!(out.trials.iter().map(|t| t.budget).collect::<Vec<_>>().starts_with(&[12.0, 12.0, 12.0, 30.0]));
}

#[test]
fn failed_trials_are_recorded() {
    let mut plan = small(Experiment::RoundingGap);
    plan.instance.kind = InstanceKind::RandomGaussian;
    plan.instance.d = 3;
    plan.instance.m = 4;
    plan.barrier.max_inner_iterations = 1;
    plan.barrier.mu_final = 0.5;
    plan.solver = SolverChoice::Barrier;
    let out = run(&plan).unwrap();
    assert_eq!(out.trials.len(), 3);
    let mut broken = plan.clone();
    broken.instance.kappa.low = 2.0;
    broken.instance.kappa.high = 1.0;
    assert!(run(&broken).is_err());
}

#[test]
fn repeated_runs_are_identical() {
    let plan = small(Experiment::CompareSolvers);
    let strip = |p: &ExperimentPlan| -> Vec<_> { run(p).unwrap().trials.iter().map(|t| t.without_timings()).collect() };
    assert_eq!(strip(&plan), strip(&plan));
    let mut one = plan.clone();
    one.threads = Some(1);
    assert_eq!(strip(&plan), strip(&one));
}

#[test]
fn plan_file_flattens_instance_keys() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("plan.toml");
    fs::write(
        &path,
        r#"
kind = "random-gaussian"
d = 4
m = 6
seed = 9
budget_per_sensor = 3
trials = 2
sweep = [2.0, 3.0]
solver = "both"
fw_start = "uniform"

[kappa]
low = 0.9
high = 1.1

[fw]
max_iterations = 50
step_rule = "adaptive-lipschitz"
time_limit = 5.0

[barrier]
mu_final = 1e-6
"#,
    )
    .unwrap();
    let plan = PlanFile::load(&path).unwrap().into_plan(Experiment::UniformSweep);
    assert_eq!(plan.trials, 2);
    assert_eq!(plan.instance.seed, 9);
    assert_eq!(plan.instance.budget_per_sensor, 3.0);
    assert_eq!(plan.sweep_values, Some(vec![2.0, 3.0]));
    assert_eq!(plan.solver, SolverChoice::Both);
    assert_eq!(plan.fw_start, FwStart::Uniform);
    assert_eq!(plan.fw.max_iterations, 50);
    assert_eq!(plan.fw.time_limit.as_secs_f64(), 5.0);
    assert_eq!(plan.barrier.mu_final, 1e-6);
    assert_eq!(plan.barrier.mu_initial, 1.0);
    assert!(plan.validate().is_ok());
}
