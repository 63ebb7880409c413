//! Experiment harness: randomized trials, per-trial records and aggregates.
//!
//! Trial `t` of a plan uses seed `plan_seed + t`. Sweeps reuse the same seeds
//! at every sweep value, so only the swept quantity changes between columns.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::{solve_barrier, BarrierConfig, KktCertificate};
use crate::error::{Error, Result};
use crate::fw::{solve_fw, FwConfig};
use crate::instances::{generate, uniform_allocation, InstanceSpec};
use crate::model::{BitVector, ProblemInstance};
use crate::quantizer::{simulate_lmmse, DitherMode, QuantizerBank};
use crate::rounding::round_and_report;
use crate::trace::{SolveTrace, SolverKind};

/// Chunks used by the Monte-Carlo check; fixed so reports do not depend on
/// the thread count.
pub const VALIDATION_PARTITIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Solve,
    CompareSolvers,
    RoundingGap,
    UniformSweep,
    SensorScaling,
    Validate,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::CompareSolvers => "compare",
            Experiment::RoundingGap => "rounding-gap",
            Experiment::UniformSweep => "uniform-sweep",
            Experiment::SensorScaling => "sensor-scaling",
            Experiment::Validate => "validate",
        }
    }

    fn needs_sweep(self) -> bool {
        matches!(self, Experiment::UniformSweep | Experiment::SensorScaling)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    Fw,
    Barrier,
    Both,
}

impl SolverChoice {
    fn kinds(self) -> &'static [SolverKind] {
        match self {
            SolverChoice::Fw => &[SolverKind::FrankWolfe],
            SolverChoice::Barrier => &[SolverKind::Barrier],
            SolverChoice::Both => &[SolverKind::FrankWolfe, SolverKind::Barrier],
        }
    }
}

fn solver_name(kind: SolverKind) -> &'static str {
    match kind {
        SolverKind::FrankWolfe => "fw",
        SolverKind::Barrier => "barrier",
    }
}

/// Starting point handed to Frank-Wolfe.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FwStart {
    #[default]
    Origin,
    /// `(B/m)·1`, the barrier solver's starting point.
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub experiment: Experiment,
    pub instance: InstanceSpec,
    pub trials: usize,
    /// Budgets per sensor `c` for uniform sweeps, ratios `m/d` for scaling sweeps.
    pub sweep_values: Option<Vec<f64>>,
    pub solver: SolverChoice,
    pub fw: FwConfig,
    pub fw_start: FwStart,
    pub barrier: BarrierConfig,
    pub validation_samples: usize,
    pub threads: Option<usize>,
}

impl ExperimentPlan {
    pub fn new(experiment: Experiment, instance: InstanceSpec) -> Self {
        let solver = match experiment {
            Experiment::Solve | Experiment::SensorScaling => SolverChoice::Fw,
            Experiment::CompareSolvers => SolverChoice::Both,
            _ => SolverChoice::Barrier,
        };
        Self {
            experiment,
            instance,
            trials: 30,
            sweep_values: None,
            solver,
            fw: FwConfig::default(),
            fw_start: FwStart::Origin,
            barrier: BarrierConfig::default(),
            validation_samples: 100_000,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        self.fw.validate()?;
        self.barrier.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.experiment.needs_sweep() {
            match &self.sweep_values {
                Some(v) if !v.is_empty() => {
                    if v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                        return Err(Error::Config("sweep values must be nonnegative".into()));
                    }
                }
                _ => {
                    return Err(Error::Config(format!(
                        "{} needs a nonempty sweep",
                        self.experiment.as_str()
                    )))
                }
            }
        }
        if self.experiment == Experiment::Validate && self.validation_samples == 0 {
            return Err(Error::Config("validation needs at least one sample".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    fn trial_count(&self) -> usize {
        if self.experiment == Experiment::Solve {
            1
        } else {
            self.trials
        }
    }
}

/// Keys accepted in a plan file: the instance schema at top level plus
/// optional experiment settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanFile {
    #[serde(flatten)]
    pub instance: InstanceSpec,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: Option<SolverChoice>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub fw_start: Option<FwStart>,
    #[serde(default)]
    pub fw: Option<FwConfig>,
    #[serde(default)]
    pub barrier: Option<BarrierConfig>,
}

impl PlanFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut file: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        if let Some(dir) = path.parent() {
            file.instance.paths.resolve_against(dir);
        }
        Ok(file)
    }

    pub fn into_plan(self, experiment: Experiment) -> ExperimentPlan {
        let mut plan = ExperimentPlan::new(experiment, self.instance);
        if let Some(t) = self.trials {
            plan.trials = t;
        }
        plan.sweep_values = self.sweep;
        if let Some(s) = self.solver {
            plan.solver = s;
        }
        if let Some(start) = self.fw_start {
            plan.fw_start = start;
        }
        if let Some(n) = self.samples {
            plan.validation_samples = n;
        }
        if let Some(fw) = self.fw {
            plan.fw = fw;
        }
        if let Some(b) = self.barrier {
            plan.barrier = b;
        }
        plan
    }
}

/// One solver run on one trial instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: String,
    pub sweep_value: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub d: usize,
    pub m: usize,
    pub budget: f64,
    pub solver: String,
    pub status: String,
    pub note: Option<String>,
    pub termination: Option<String>,
    pub iterations: Option<usize>,
    pub relaxed_objective: Option<f64>,
    pub budget_slack: Option<f64>,
    /// Smallest FW gap, or the KKT stationarity residual for barrier runs.
    pub final_gap: Option<f64>,
    pub certificate_bound: Option<f64>,
    pub certificate_holds: Option<bool>,
    pub kkt_lambda: Option<f64>,
    pub kkt_complementarity: Option<f64>,
    pub rounded_objective: Option<f64>,
    pub residual_budget: Option<u64>,
    pub distance_squared: Option<f64>,
    pub distance_bound: Option<f64>,
    pub gap_actual: Option<f64>,
    pub gap_bound: Option<f64>,
    pub simplified_gap_bound: Option<f64>,
    pub gap_ratio: Option<f64>,
    pub uniform_objective: Option<f64>,
    pub improvement_pct: Option<f64>,
    /// `|F_fw − F_barrier| / F_barrier` when both solvers ran on the trial.
    pub objective_rel_diff: Option<f64>,
    pub solve_seconds: Option<f64>,
    pub per_iteration_seconds: Option<f64>,
}

impl TrialRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    /// Copy with wall-clock fields cleared, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        Self {
            solve_seconds: None,
            per_iteration_seconds: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub trial: usize,
    pub seed: u64,
    pub mode: String,
    pub samples: usize,
    pub empirical_mse: f64,
    pub analytic_mse: f64,
    pub standard_error: f64,
    pub mse_z_score: f64,
    pub max_error_mean_z: f64,
    pub max_ks_distance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub sweep_value: Option<f64>,
    pub solver: String,
    pub metric: String,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub trials: Vec<TrialRecord>,
    pub validation: Vec<ValidationRecord>,
    pub summary: Vec<SummaryRow>,
    /// Full traces, kept for the single-instance `solve` experiment.
    pub traces: Vec<SolveTrace>,
}

impl ExperimentOutput {
    pub fn all_failed(&self) -> bool {
        if !self.validation.is_empty() {
            return false;
        }
        !self.trials.iter().any(TrialRecord::ok)
    }

    /// Summary value for one metric.
    pub fn median(&self, metric: &str, solver: &str, sweep_value: Option<f64>) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.metric == metric && r.solver == solver && r.sweep_value == sweep_value)
            .map(|r| r.median)
    }
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

struct Solved {
    trace: SolveTrace,
    kkt: Option<KktCertificate>,
}

fn run_solver(kind: SolverKind, instance: &ProblemInstance, plan: &ExperimentPlan) -> Result<Solved> {
    match kind {
        SolverKind::FrankWolfe => {
            let start = match plan.fw_start {
                FwStart::Origin => None,
                FwStart::Uniform => {
                    let m = instance.sensors();
                    Some(BitVector::new(vec![instance.budget() / m as f64; m])?)
                }
            };
            Ok(Solved {
                trace: solve_fw(instance, &plan.fw, start.as_ref())?,
                kkt: None,
            })
        }
        SolverKind::Barrier => {
            let (trace, kkt) = solve_barrier(instance, &plan.barrier, None)?;
            Ok(Solved { trace, kkt: Some(kkt) })
        }
    }
}

struct Unit {
    sweep_value: Option<f64>,
    trial: usize,
}

fn unit_spec(plan: &ExperimentPlan, unit: &Unit) -> InstanceSpec {
    let mut spec = plan.instance.with_seed(plan.instance.seed.wrapping_add(unit.trial as u64));
    match (plan.experiment, unit.sweep_value) {
        (Experiment::UniformSweep, Some(c)) => {
            spec.budget_per_sensor = c;
            spec.budget = None;
        }
        (Experiment::SensorScaling, Some(ratio)) => {
            spec.m = ((ratio * spec.d as f64).round() as usize).max(1);
            // budget scales with the state dimension, B = c·d
            spec.budget = Some(spec.budget.unwrap_or(spec.budget_per_sensor * spec.d as f64));
        }
        _ => {}
    }
    spec
}

fn base_record(plan: &ExperimentPlan, unit: &Unit, seed: u64) -> TrialRecord {
    TrialRecord {
        experiment: plan.experiment.as_str().to_string(),
        sweep_value: unit.sweep_value,
        trial: unit.trial,
        seed,
        status: "ok".into(),
        ..TrialRecord::default()
    }
}

struct UnitResult {
    records: Vec<TrialRecord>,
    validation: Vec<ValidationRecord>,
    traces: Vec<SolveTrace>,
}

fn run_unit(plan: &ExperimentPlan, unit: &Unit) -> UnitResult {
    let spec = unit_spec(plan, unit);
    let mut result = UnitResult {
        records: Vec::new(),
        validation: Vec::new(),
        traces: Vec::new(),
    };
    let instance = match generate(&spec) {
        Ok(i) => i,
        Err(e) => {
            let mut rec = base_record(plan, unit, spec.seed);
            rec.status = format!("failed: {e}");
            result.records.push(rec);
            return result;
        }
    };
    if plan.experiment == Experiment::Validate {
        match validate_unit(plan, unit, spec.seed, &instance) {
            Ok(v) => result.validation = v,
            Err(e) => {
                let mut rec = base_record(plan, unit, spec.seed);
                rec.status = format!("failed: {e}");
                result.records.push(rec);
            }
        }
        return result;
    }

    let uniform_objective = if plan.experiment == Experiment::UniformSweep {
        match instance.objective(&uniform_allocation(&instance)) {
            Ok(v) => Some(v),
            Err(e) => {
                let mut rec = base_record(plan, unit, spec.seed);
                rec.status = format!("failed: {e}");
                result.records.push(rec);
                return result;
            }
        }
    } else {
        None
    };

    for &kind in plan.solver.kinds() {
        let mut rec = base_record(plan, unit, spec.seed);
        rec.solver = solver_name(kind).into();
        rec.d = instance.states();
        rec.m = instance.sensors();
        rec.budget = instance.budget();
        match run_solver(kind, &instance, plan) {
            Err(e) => rec.status = format!("failed: {e}"),
            Ok(solved) => {
                fill_solution(&mut rec, &instance, &solved, uniform_objective);
                if plan.experiment == Experiment::Solve {
                    result.traces.push(solved.trace);
                }
            }
        }
        result.records.push(rec);
    }

    let objective_of = |name: &str| {
        result
            .records
            .iter()
            .find(|r| r.solver == name && r.ok())
            .and_then(|r| r.relaxed_objective)
    };
    if let (Some(f_fw), Some(f_bar)) = (objective_of("fw"), objective_of("barrier")) {
        let diff = (f_fw - f_bar).abs() / f_bar;
        for r in &mut result.records {
            r.objective_rel_diff = Some(diff);
        }
    }
    result
}

fn fill_solution(
    rec: &mut TrialRecord,
    instance: &ProblemInstance,
    solved: &Solved,
    uniform_objective: Option<f64>,
) {
    let trace = &solved.trace;
    let iterations = trace.iterations();
    rec.termination = Some(trace.termination.as_str().into());
    rec.iterations = Some(iterations);
    rec.relaxed_objective = Some(trace.final_objective);
    rec.budget_slack = Some(instance.budget() - trace.final_bits.total());
    rec.solve_seconds = Some(trace.elapsed_secs);
    rec.per_iteration_seconds = Some(trace.elapsed_secs / iterations.max(1) as f64);
    match (&trace.certificate, &solved.kkt) {
        (Some(c), _) => {
            rec.final_gap = Some(c.min_gap);
            rec.certificate_bound = Some(c.bound);
            rec.certificate_holds = Some(c.holds());
        }
        (None, Some(k)) => {
            rec.final_gap = Some(k.stationarity_residual);
            rec.kkt_lambda = Some(k.lambda);
            rec.kkt_complementarity = Some(k.complementarity_residual);
        }
        (None, None) => {}
    }
    match round_and_report(instance, &trace.final_bits) {
        Ok(report) => {
            rec.rounded_objective = Some(report.rounded_objective);
            rec.residual_budget = Some(report.residual_budget);
            rec.distance_squared = Some(report.distance_squared);
            rec.distance_bound = Some(report.distance_bound);
            rec.gap_actual = Some(report.gap_actual);
            rec.gap_bound = Some(report.gap_bound);
            rec.simplified_gap_bound = Some(report.simplified_gap_bound);
            rec.gap_ratio = Some(report.gap_ratio());
            if let Some(u) = uniform_objective {
                rec.uniform_objective = Some(u);
                rec.improvement_pct = Some(100.0 * (u - report.rounded_objective) / u);
            }
        }
        Err(e) => rec.note = Some(format!("rounding skipped: {e}")),
    }
}

fn validate_unit(
    plan: &ExperimentPlan,
    unit: &Unit,
    seed: u64,
    instance: &ProblemInstance,
) -> Result<Vec<ValidationRecord>> {
    let bits = uniform_allocation(instance);
    let mut out = Vec::new();
    for mode in [DitherMode::Subtractive, DitherMode::NonSubtractive] {
        let bank = QuantizerBank::for_allocation(instance, &bits, mode, seed)?;
        let report = simulate_lmmse(instance, &bits, plan.validation_samples, &bank, VALIDATION_PARTITIONS)?;
        let mse_z_score = report.mse_z_score();
        let max_error_mean_z = report.max_error_mean_z();
        let pass = match mode {
            DitherMode::Subtractive => {
                mse_z_score <= 3.0 && max_error_mean_z <= 4.0 && report.max_ks_distance <= 0.01
            }
            DitherMode::NonSubtractive => max_error_mean_z <= 4.0,
        };
        out.push(ValidationRecord {
            trial: unit.trial,
            seed,
            mode: mode.as_str().into(),
            samples: report.sample_count,
            empirical_mse: report.empirical_mse,
            analytic_mse: report.analytic_mse,
            standard_error: report.standard_error,
            mse_z_score,
            max_error_mean_z,
            max_ks_distance: report.max_ks_distance,
            pass,
        });
    }
    Ok(out)
}

const SUMMARY_METRICS: &[(&str, fn(&TrialRecord) -> Option<f64>)] = &[
    ("relaxed_objective", |r| r.relaxed_objective),
    ("rounded_objective", |r| r.rounded_objective),
    ("iterations", |r| r.iterations.map(|i| i as f64)),
    ("gap_actual", |r| r.gap_actual),
    ("gap_bound", |r| r.gap_bound),
    ("gap_ratio", |r| r.gap_ratio),
    ("improvement_pct", |r| r.improvement_pct),
    ("objective_rel_diff", |r| r.objective_rel_diff),
    ("solve_seconds", |r| r.solve_seconds),
    ("per_iteration_seconds", |r| r.per_iteration_seconds),
];

fn summarize(experiment: Experiment, records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<(Option<f64>, String)> = Vec::new();
    for r in records.iter().filter(|r| r.ok()) {
        let key = (r.sweep_value, r.solver.clone());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    let mut rows = Vec::new();
    for (sweep_value, solver) in groups {
        for (metric, get) in SUMMARY_METRICS {
            let mut values: Vec<f64> = records
                .iter()
                .filter(|r| r.ok() && r.sweep_value == sweep_value && r.solver == solver)
                .filter_map(get)
                .filter(|v| v.is_finite())
                .collect();
            if values.is_empty() {
                continue;
            }
            values.sort_by(f64::total_cmp);
            rows.push(SummaryRow {
                experiment: experiment.as_str().into(),
                sweep_value,
                solver: solver.clone(),
                metric: (*metric).into(),
                count: values.len(),
                median: quantile(&values, 0.5),
                q1: quantile(&values, 0.25),
                q3: quantile(&values, 0.75),
            });
        }
    }
    rows
}

/// Runs every trial of the plan; output order follows (sweep value, trial)
/// regardless of completion order.
pub fn run(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    plan.validate()?;
    let sweep: Vec<Option<f64>> = match (&plan.sweep_values, plan.experiment.needs_sweep()) {
        (Some(v), true) => v.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    let units: Vec<Unit> = sweep
        .iter()
        .flat_map(|&sweep_value| (0..plan.trial_count()).map(move |trial| Unit { sweep_value, trial }))
        .collect();
    let execute = || -> Vec<UnitResult> { units.par_iter().map(|u| run_unit(plan, u)).collect() };
    let results = match plan.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(execute),
        None => execute(),
    };
    let mut output = ExperimentOutput::default();
    for r in results {
        output.trials.extend(r.records);
        output.validation.extend(r.validation);
        output.traces.extend(r.traces);
    }
    output.summary = summarize(plan.experiment, &output.trials);
    Ok(output)
}
