//! Python bindings for the `bitalloc` crate.
//!
//! Matrices cross the boundary as lists of rows, vectors as lists of floats.

use std::time::Duration;

use ::bitalloc as core;
use core::{
    BarrierConfig, DitherMode, FwConfig, InstanceKind, InstanceSpec, ProblemInstance, QuantizerBank, SolveTrace,
    StepRule,
};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("{what} must be a non-empty list of equal-length rows")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied()))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// A linear sensing problem `y = Hx + ε` with a bit budget.
#[pyclass(name = "Instance", frozen)]
struct PyInstance {
    inner: ProblemInstance,
}

#[pymethods]
impl PyInstance {
    /// `h` is m×d, `kappa` has length m, `prior` is d×d (identity when omitted).
    #[new]
    #[pyo3(signature = (h, kappa, budget, prior=None))]
    fn new(h: Vec<Vec<f64>>, kappa: Vec<f64>, budget: f64, prior: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let h = matrix(&h, "h")?;
        let prior = match prior {
            Some(p) => matrix(&p, "prior")?,
            None => DMatrix::identity(h.ncols(), h.ncols()),
        };
        let inner = ProblemInstance::new(h, prior, DVector::from_vec(kappa), budget).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn sensors(&self) -> usize {
        self.inner.sensors()
    }

    #[getter]
    fn states(&self) -> usize {
        self.inner.states()
    }

    #[getter]
    fn budget(&self) -> f64 {
        self.inner.budget()
    }

    #[getter]
    fn kappa(&self) -> Vec<f64> {
        self.inner.kappa().as_slice().to_vec()
    }

    #[getter]
    fn sensing_matrix(&self) -> Vec<Vec<f64>> {
        rows(self.inner.sensing_matrix())
    }

    fn with_budget(&self, budget: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_budget(budget).map_err(py_err)?,
        })
    }

    fn objective(&self, bits: Vec<f64>) -> PyResult<f64> {
        self.inner.objective(&bits).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(states={}, sensors={}, budget={})",
            self.inner.states(),
            self.inner.sensors(),
            self.inner.budget()
        )
    }
}

/// Builds a generated instance; `kind` is "random-gaussian" or "grid-laplacian".
#[pyfunction]
#[pyo3(signature = (kind, d, m, seed=0, budget_per_sensor=2.0))]
fn generate(kind: &str, d: usize, m: usize, seed: u64, budget_per_sensor: f64) -> PyResult<PyInstance> {
    let kind = match kind {
        "random-gaussian" => InstanceKind::RandomGaussian,
        "grid-laplacian" => InstanceKind::GridLaplacian,
        other => return Err(PyValueError::new_err(format!("unknown instance kind {other:?}"))),
    };
    let mut spec = InstanceSpec::new(kind, d, m);
    spec.seed = seed;
    spec.budget_per_sensor = budget_per_sensor;
    Ok(PyInstance {
        inner: core::generate(&spec).map_err(py_err)?,
    })
}

/// Objective, gradient and error covariance at `bits`.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, instance: &PyInstance, bits: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let e = instance.inner.evaluate(&bits).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("objective", e.objective)?;
    out.set_item("gradient", e.gradient.as_slice().to_vec())?;
    out.set_item("precisions", e.precisions.as_slice().to_vec())?;
    out.set_item("covariance", rows(&e.covariance))?;
    Ok(out)
}

#[pyfunction]
fn lipschitz(instance: &PyInstance) -> f64 {
    instance.inner.lipschitz_constant()
}

#[pyfunction]
fn uniform_allocation(instance: &PyInstance) -> Vec<f64> {
    core::uniform_allocation(&instance.inner).into_vec()
}

fn trace_dict<'py>(py: Python<'py>, trace: SolveTrace) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("bits", trace.final_bits.as_slice().to_vec())?;
    out.set_item("objective", trace.final_objective)?;
    out.set_item("termination", trace.termination.as_str())?;
    out.set_item("iterations", trace.records.len())?;
    out.set_item("objectives", trace.records.iter().map(|r| r.objective).collect::<Vec<_>>())?;
    out.set_item("gaps", trace.records.iter().map(|r| r.gap).collect::<Vec<_>>())?;
    out.set_item("elapsed_secs", trace.elapsed_secs)?;
    if let Some(c) = trace.certificate {
        let cert = PyDict::new(py);
        cert.set_item("min_gap", c.min_gap)?;
        cert.set_item("bound", c.bound)?;
        cert.set_item("holds", c.min_gap <= c.bound)?;
        out.set_item("certificate", cert)?;
    }
    Ok(out)
}

/// Frank-Wolfe; `step_rule` is "short-step" or "adaptive-lipschitz".
#[pyfunction]
#[pyo3(signature = (instance, max_iterations=500, gap_tolerance=1e-6, step_rule="short-step", start=None, time_limit=600.0))]
fn solve_fw<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    max_iterations: usize,
    gap_tolerance: f64,
    step_rule: &str,
    start: Option<Vec<f64>>,
    time_limit: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let step_rule = match step_rule {
        "short-step" => StepRule::ShortStep,
        "adaptive-lipschitz" => StepRule::AdaptiveLipschitz,
        other => return Err(PyValueError::new_err(format!("unknown step rule {other:?}"))),
    };
    let time_limit =
        Duration::try_from_secs_f64(time_limit).map_err(|e| PyValueError::new_err(format!("time_limit: {e}")))?;
    let cfg = FwConfig {
        max_iterations,
        gap_tolerance,
        step_rule,
        time_limit,
        ..FwConfig::default()
    };
    let start = start.map(core::BitVector::new).transpose().map_err(py_err)?;
    let trace = py
        .detach(|| core::solve_fw(&instance.inner, &cfg, start.as_ref()))
        .map_err(py_err)?;
    trace_dict(py, trace)
}

/// Log-barrier interior-point method with default settings.
#[pyfunction]
#[pyo3(signature = (instance, mu_final=None))]
fn solve_barrier<'py>(py: Python<'py>, instance: &PyInstance, mu_final: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = BarrierConfig::default();
    if let Some(mu) = mu_final {
        cfg.mu_final = mu;
    }
    let (trace, kkt) = py
        .detach(|| core::solve_barrier(&instance.inner, &cfg, None))
        .map_err(py_err)?;
    let out = trace_dict(py, trace)?;
    out.set_item("lambda", kkt.lambda)?;
    out.set_item("stationarity_residual", kkt.stationarity_residual)?;
    out.set_item("complementarity_residual", kkt.complementarity_residual)?;
    Ok(out)
}

/// Largest-remainder rounding to an integral allocation summing to `budget`.
#[pyfunction]
fn round(bits: Vec<f64>, budget: f64) -> PyResult<Vec<u64>> {
    Ok(core::round_largest_remainder(&bits, budget).map_err(py_err)?.bits)
}

/// Rounds `bits` for `instance` and reports the objective gap and its bound.
#[pyfunction]
fn round_and_report<'py>(py: Python<'py>, instance: &PyInstance, bits: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let r = core::round_and_report(&instance.inner, &bits).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("bits", r.rounded_bits.as_slice().to_vec())?;
    out.set_item("relaxed_objective", r.relaxed_objective)?;
    out.set_item("rounded_objective", r.rounded_objective)?;
    out.set_item("gap_actual", r.gap_actual)?;
    out.set_item("gap_bound", r.gap_bound)?;
    out.set_item("gap_ratio", r.gap_ratio())?;
    Ok(out)
}

/// Monte-Carlo check of the quantization noise model at `bits`.
#[pyfunction]
#[pyo3(signature = (instance, bits, samples=100_000, seed=0, subtractive=true, partitions=8))]
fn simulate<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    bits: Vec<f64>,
    samples: usize,
    seed: u64,
    subtractive: bool,
    partitions: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = if subtractive { DitherMode::Subtractive } else { DitherMode::NonSubtractive };
    let bank = QuantizerBank::for_allocation(&instance.inner, &bits, mode, seed).map_err(py_err)?;
    let r = py
        .detach(|| core::simulate_lmmse(&instance.inner, &bits, samples, &bank, partitions))
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("empirical_mse", r.empirical_mse)?;
    out.set_item("analytic_mse", r.analytic_mse)?;
    out.set_item("standard_error", r.standard_error)?;
    out.set_item("mse_z_score", r.mse_z_score())?;
    out.set_item("max_error_mean_z", r.max_error_mean_z())?;
    out.set_item("max_ks_distance", r.max_ks_distance)?;
    Ok(out)
}

#[pymodule]
fn bitalloc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(lipschitz, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_allocation, m)?)?;
    m.add_function(wrap_pyfunction!(solve_fw, m)?)?;
    m.add_function(wrap_pyfunction!(solve_barrier, m)?)?;
    m.add_function(wrap_pyfunction!(round, m)?)?;
    m.add_function(wrap_pyfunction!(round_and_report, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
