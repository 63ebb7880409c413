use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use bitalloc::bench::{self, Experiment, ExperimentOutput, ExperimentPlan, PlanFile, SolverChoice};
use bitalloc::io::save_results;
use bitalloc::{InstanceKind, InstanceSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bitalloc", version, about = "Bit-budget allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write its iteration trace.
    Solve(Common),
    /// Run both solvers on every trial and compare objectives.
    Compare(Common),
    /// Measure the rounding gap against its bound.
    RoundingGap(Common),
    /// Compare optimized and uniform allocations across per-sensor budgets.
    UniformSweep(Common),
    /// Time Frank-Wolfe iterations as the sensor count grows.
    SensorScaling(Common),
    /// Monte-Carlo check of the quantization noise model.
    Validate(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Fw,
    Barrier,
    Both,
}

#[derive(Args)]
struct Common {
    /// Plan file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-solve wall-clock limit.
    #[arg(long, value_name = "SECONDS")]
    time_limit: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Command::Solve(c) => (Experiment::Solve, c),
            Command::Compare(c) => (Experiment::CompareSolvers, c),
            Command::RoundingGap(c) => (Experiment::RoundingGap, c),
            Command::UniformSweep(c) => (Experiment::UniformSweep, c),
            Command::SensorScaling(c) => (Experiment::SensorScaling, c),
            Command::Validate(c) => (Experiment::Validate, c),
        }
    }
}

fn default_plan(experiment: Experiment) -> ExperimentPlan {
    let instance = match experiment {
        Experiment::SensorScaling => InstanceSpec::new(InstanceKind::RandomGaussian, 10, 10),
        Experiment::Validate => InstanceSpec::new(InstanceKind::RandomGaussian, 5, 8),
        Experiment::UniformSweep => InstanceSpec::new(InstanceKind::GridLaplacian, 50, 50),
        _ => InstanceSpec::new(InstanceKind::GridLaplacian, 13, 13),
    };
    let mut plan = ExperimentPlan::new(experiment, instance);
    plan.sweep_values = match experiment {
        Experiment::UniformSweep => Some(vec![2.0, 3.0, 4.0, 5.0, 7.0]),
        Experiment::SensorScaling => Some(vec![5.0, 50.0, 500.0]),
        _ => None,
    };
    plan
}

fn build_plan(experiment: Experiment, args: &Common) -> Result<ExperimentPlan> {
    let mut plan = match &args.config {
        Some(path) => {
            let file = PlanFile::load(path).with_context(|| format!("loading {}", path.display()))?;
            let needs_default_sweep = file.sweep.is_none();
            let mut plan = file.into_plan(experiment);
            if needs_default_sweep {
                plan.sweep_values = default_plan(experiment).sweep_values;
            }
            plan
        }
        None => default_plan(experiment),
    };
    if let Some(t) = args.trials {
        plan.trials = t;
    }
    if let Some(s) = args.solver {
        plan.solver = match s {
            SolverArg::Fw => SolverChoice::Fw,
            SolverArg::Barrier => SolverChoice::Barrier,
            SolverArg::Both => SolverChoice::Both,
        };
    }
    if let Some(seed) = args.seed {
        plan.instance.seed = seed;
    }
    if let Some(secs) = args.time_limit {
        let limit = Duration::try_from_secs_f64(secs).context("--time-limit must be a nonnegative number")?;
        plan.fw.time_limit = limit;
        plan.barrier.time_limit = limit;
    }
    plan.threads = args.threads.or(plan.threads);
    plan.validate()?;
    Ok(plan)
}

fn write_outputs(dir: &Path, plan: &ExperimentPlan, output: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = plan.experiment.as_str();
    if !output.trials.is_empty() {
        save_results(dir.join(format!("{name}_trials.csv")), &output.trials)?;
    }
    if !output.summary.is_empty() {
        save_results(dir.join(format!("{name}_summary.csv")), &output.summary)?;
    }
    if !output.validation.is_empty() {
        save_results(dir.join(format!("{name}_validation.csv")), &output.validation)?;
    }
    for (i, trace) in output.traces.iter().enumerate() {
        let suffix = if output.traces.len() > 1 { format!("_{i}") } else { String::new() };
        let path = dir.join(format!("{name}_trace{suffix}.jsonl"));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        trace.write_jsonl(std::io::BufWriter::new(file))?;
    }
    Ok(())
}

fn print_summary(output: &ExperimentOutput) {
    for row in &output.summary {
        let sweep = row.sweep_value.map_or(String::new(), |v| format!(" @ {v}"));
        println!(
            "{}{} {} {}: median {:.6e} [q1 {:.6e}, q3 {:.6e}] n={}",
            row.experiment, sweep, row.solver, row.metric, row.median, row.q1, row.q3, row.count
        );
    }
    for v in &output.validation {
        println!(
            "validate trial {} {}: mse {:.6e} vs {:.6e} (z {:.2}), max mean z {:.2}, ks {:.4} -> {}",
            v.trial,
            v.mode,
            v.empirical_mse,
            v.analytic_mse,
            v.mse_z_score,
            v.max_error_mean_z,
            v.max_ks_distance,
            if v.pass { "pass" } else { "fail" }
        );
    }
    for t in output.trials.iter().filter(|t| !t.ok()) {
        eprintln!("trial {} ({}): {}", t.trial, t.solver, t.status);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = cli.command.split();
    let plan = match build_plan(experiment, &args) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let output = match bench::run(&plan) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    print_summary(&output);
    if let Err(e) = write_outputs(&args.out, &plan, &output) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    if output.all_failed() {
        eprintln!("error: every trial failed");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
