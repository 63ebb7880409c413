//! Log-barrier interior-point solver.
//!
//! Each subproblem minimizes `F(b) − μ Σ ln bᵢ − μ ln(B − 1ᵀb)` with a
//! limited-memory quasi-Newton method. The curvature model is a compact L-BFGS
//! approximation of `∇²F` plus the exact barrier Hessian
//! `μ diag(1/b²) + μ/s² 11ᵀ`, inverted with the Woodbury identity in `O(m k²)`.
//! The F-curvature pairs carry over between barrier parameters.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fw::secs;
use crate::model::{BitVector, Evaluation, ProblemInstance};
use crate::trace::{IterationRecord, SolveTrace, SolverKind, Termination};

const ARMIJO_C1: f64 = 1e-4;
const FRACTION_TO_BOUNDARY: f64 = 0.995;
const MAX_BACKTRACKS: usize = 60;
const START_SHRINK: f64 = 1e-6;
/// Residual accepted when the line search can no longer decrease the barrier
/// value in floating point.
const STALL_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BarrierConfig {
    pub mu_initial: f64,
    pub mu_decrease_factor: f64,
    pub mu_final: f64,
    /// Inner loop stops once `‖∇φ‖∞ ≤ tol · max(1, μ)`.
    pub inner_gradient_tolerance: f64,
    pub lbfgs_memory: usize,
    pub max_inner_iterations: usize,
    #[serde(with = "secs")]
    pub time_limit: Duration,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            mu_initial: 1.0,
            mu_decrease_factor: 0.1,
            mu_final: 1e-9,
            inner_gradient_tolerance: 1e-8,
            lbfgs_memory: 10,
            max_inner_iterations: 2000,
            time_limit: Duration::from_secs(600),
        }
    }
}

impl BarrierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_final > 0.0 && self.mu_final < self.mu_initial) {
            return Err(Error::Config("require 0 < mu_final < mu_initial".into()));
        }
        if !(self.mu_decrease_factor > 0.0 && self.mu_decrease_factor < 1.0) {
            return Err(Error::Config("mu_decrease_factor must lie in (0, 1)".into()));
        }
        if !(self.inner_gradient_tolerance > 0.0) {
            return Err(Error::Config("inner_gradient_tolerance must be positive".into()));
        }
        if self.lbfgs_memory == 0 || self.max_inner_iterations == 0 {
            return Err(Error::Config("lbfgs_memory and max_inner_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Multipliers recovered from the final barrier subproblem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KktCertificate {
    /// Budget-constraint multiplier `λ ≈ μ / (B − 1ᵀb)`.
    pub lambda: f64,
    /// Bound multipliers `μᵢ ≈ μ / bᵢ`.
    pub mu_bounds: Vec<f64>,
    /// `‖∇F(b) + λ1 − μ‖∞`.
    pub stationarity_residual: f64,
    /// `maxᵢ |μᵢ bᵢ|`.
    pub complementarity_residual: f64,
    pub gradient_inf_norm: f64,
    /// `B − 1ᵀb` at the final interior iterate, before the leftover is spread
    /// across sensors.
    #[serde(default)]
    pub interior_slack: f64,
}

impl KktCertificate {
    pub fn from_multipliers(gradient: &[f64], bits: &[f64], lambda: f64, mu_bounds: Vec<f64>) -> Self {
        let stationarity_residual = gradient
            .iter()
            .zip(&mu_bounds)
            .map(|(g, m)| (g + lambda - m).abs())
            .fold(0.0, f64::max);
        let complementarity_residual = mu_bounds
            .iter()
            .zip(bits)
            .map(|(m, b)| (m * b).abs())
            .fold(0.0, f64::max);
        let gradient_inf_norm = gradient.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
        Self {
            lambda,
            mu_bounds,
            stationarity_residual,
            complementarity_residual,
            gradient_inf_norm,
            interior_slack: 0.0,
        }
    }
}

/// Barrier value and gradient at a strictly interior point.
pub fn barrier_objective(instance: &ProblemInstance, bits: &[f64], mu: f64) -> Result<(f64, DVector<f64>)> {
    let eval = instance.evaluate(bits)?;
    let bp = BarrierPoint::new(instance, bits, mu, eval)?;
    Ok((bp.value, bp.gradient))
}

struct BarrierPoint {
    value: f64,
    gradient: DVector<f64>,
    slack: f64,
    eval: Evaluation,
}

impl BarrierPoint {
    fn new(instance: &ProblemInstance, bits: &[f64], mu: f64, eval: Evaluation) -> Result<Self> {
        let slack = instance.budget() - bits.iter().sum::<f64>();
        if let Some((i, b)) = bits.iter().enumerate().find(|(_, b)| !(**b > 0.0)) {
            return Err(Error::NotInterior(format!("component {i} = {b} is not positive")));
        }
        if !(slack > 0.0) {
            return Err(Error::NotInterior(format!("budget slack {slack} is not positive")));
        }
        let log_sum: f64 = bits.iter().map(|b| b.ln()).sum();
        let value = eval.objective - mu * log_sum - mu * slack.ln();
        let gradient = DVector::from_iterator(
            bits.len(),
            eval.gradient
                .iter()
                .zip(bits)
                .map(|(g, b)| g - mu / b + mu / slack),
        );
        Ok(Self {
            value,
            gradient,
            slack,
            eval,
        })
    }
}

/// Curvature pairs `(s, y)` of `F` alone.
struct CurvatureMemory {
    capacity: usize,
    pairs: VecDeque<(DVector<f64>, DVector<f64>)>,
}

impl CurvatureMemory {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
        }
    }

    fn push(&mut self, s: DVector<f64>, y: DVector<f64>) {
        let sy = s.dot(&y);
        if !(sy > 1e-10 * s.norm() * y.norm()) || !sy.is_finite() {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y));
    }

    fn scaling(&self) -> f64 {
        match self.pairs.back() {
            Some((s, y)) => y.norm_squared() / s.dot(y),
            None => 1.0,
        }
    }

    /// Solves `(B_F + μ diag(1/b²) + (μ/s²) 11ᵀ) p = rhs`.
    fn solve(&self, bits: &[f64], mu: f64, slack: f64, rhs: &DVector<f64>) -> DVector<f64> {
        let m = bits.len();
        let sigma = self.scaling();
        let diag = DVector::from_iterator(m, bits.iter().map(|b| sigma + mu / (b * b)));
        let k = self.pairs.len();

        // U = [u, σS, Y], capacitance = blockdiag(1, −Mid) + Uᵀ D⁻¹ U
        let cols = 2 * k + 1;
        let mut u = DMatrix::zeros(m, cols);
        let u0 = mu.sqrt() / slack;
        for i in 0..m {
            u[(i, 0)] = u0;
        }
        for (j, (s, y)) in self.pairs.iter().enumerate() {
            u.set_column(1 + j, &(s * sigma));
            u.set_column(1 + k + j, y);
        }
        let mut cap = DMatrix::zeros(cols, cols);
        cap[(0, 0)] = 1.0;
        for a in 0..k {
            for b in 0..k {
                let (sa, ya) = &self.pairs[a];
                let (sb, yb) = &self.pairs[b];
                cap[(1 + a, 1 + b)] = -sigma * sa.dot(sb);
                // lower block L_ab = s_a' y_b for a > b
                let l_ab = if a > b { sa.dot(yb) } else { 0.0 };
                cap[(1 + k + b, 1 + a)] = -l_ab;
                cap[(1 + a, 1 + k + b)] = -l_ab;
                if a == b {
                    cap[(1 + k + a, 1 + k + a)] = sa.dot(ya);
                }
            }
        }
        let mut dinv_u = u.clone();
        for i in 0..m {
            let inv = 1.0 / diag[i];
            for j in 0..cols {
                dinv_u[(i, j)] *= inv;
            }
        }
        cap += u.transpose() * &dinv_u;
        let dinv_r = rhs.component_div(&diag);
        let small = u.tr_mul(&dinv_r);
        match cap.lu().solve(&small) {
            Some(z) if z.iter().all(|v| v.is_finite()) => dinv_r - dinv_u * z,
            _ => {
                // rank-one (slack) part only, via Sherman–Morrison
                let ones_d = diag.map(|v| 1.0 / v);
                let denom = 1.0 + u0 * u0 * ones_d.sum();
                let proj = u0 * u0 * dinv_r.sum() / denom;
                dinv_r - ones_d * proj
            }
        }
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Largest step in `(0, 1]` keeping `b + αp` a fixed fraction away from the boundary.
fn max_step(bits: &[f64], slack: f64, dir: &DVector<f64>) -> f64 {
    let mut alpha: f64 = 1.0;
    for (b, p) in bits.iter().zip(dir.iter()) {
        if *p < 0.0 {
            alpha = alpha.min(-FRACTION_TO_BOUNDARY * b / p);
        }
    }
    let total: f64 = dir.sum();
    if total > 0.0 {
        alpha = alpha.min(FRACTION_TO_BOUNDARY * slack / total);
    }
    alpha
}

pub fn solve_barrier(
    instance: &ProblemInstance,
    config: &BarrierConfig,
    start: Option<&BitVector>,
) -> Result<(SolveTrace, KktCertificate)> {
    config.validate()?;
    let m = instance.sensors();
    let budget = instance.budget();
    if !(budget > 0.0) {
        return Err(Error::NotInterior("barrier solver needs a positive budget".into()));
    }
    let mut bits: Vec<f64> = match start {
        Some(s) => s.as_slice().to_vec(),
        None => vec![budget / m as f64 * (1.0 - START_SHRINK); m],
    };
    if bits.len() != m {
        return Err(Error::DimensionMismatch {
            what: "barrier start length",
            expected: m,
            found: bits.len(),
        });
    }

    let clock = Instant::now();
    let mut mu = config.mu_initial;
    let mut memory = CurvatureMemory::new(config.lbfgs_memory);
    let mut point = BarrierPoint::new(instance, &bits, mu, instance.evaluate(&bits)?)?;
    let mut records = Vec::new();
    let mut iteration = 0usize;
    let mut outer = 0usize;
    let mut termination = Termination::KktConverged;
    let push = |records: &mut Vec<IterationRecord>, it: usize, p: &BarrierPoint, step: f64, mu: f64| {
        records.push(IterationRecord {
            iteration: it,
            objective: p.eval.objective,
            gap: inf_norm(&p.gradient),
            step,
            vertex: None,
            lipschitz_estimate: None,
            mu: Some(mu),
            elapsed_secs: clock.elapsed().as_secs_f64(),
        });
    };
    push(&mut records, iteration, &point, 0.0, mu);

    'outer: loop {
        let tol = config.inner_gradient_tolerance * mu.max(1.0);
        let mut inner = 0usize;
        while inf_norm(&point.gradient) > tol && inner < config.max_inner_iterations {
            if clock.elapsed() >= config.time_limit {
                termination = Termination::TimeLimit;
                break 'outer;
            }
            let mut dir = -memory.solve(&bits, mu, point.slack, &point.gradient);
            let mut slope = dir.dot(&point.gradient);
            if !(slope < 0.0) {
                memory.pairs.clear();
                dir = -memory.solve(&bits, mu, point.slack, &point.gradient);
                slope = dir.dot(&point.gradient);
            }
            let mut alpha = max_step(&bits, point.slack, &dir);
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let trial: Vec<f64> = bits.iter().zip(dir.iter()).map(|(b, p)| b + alpha * p).collect();
                let slack = budget - trial.iter().sum::<f64>();
                if trial.iter().all(|b| *b > 0.0) && slack > 0.0 {
                    let eval = instance
                        .evaluate(&trial)
                        .map_err(|e| e.at_iteration(iteration + 1))?;
                    let cand = BarrierPoint::new(instance, &trial, mu, eval)?;
                    if cand.value <= point.value + ARMIJO_C1 * alpha * slope {
                        accepted = Some((trial, cand));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some((trial, cand)) = accepted else {
                let residual = inf_norm(&point.gradient);
                // roundoff floor of the barrier value; accept and move on
                if residual <= STALL_TOLERANCE * (1.0 + inf_norm(&point.eval.gradient)) {
                    break;
                }
                return Err(Error::LineSearch {
                    outer,
                    inner,
                    mu,
                    residual,
                });
            };
            let stalled = point.value - cand.value <= 4.0 * f64::EPSILON * point.value.abs();
            let s = DVector::from_iterator(m, trial.iter().zip(&bits).map(|(a, b)| a - b));
            let y = &cand.eval.gradient - &point.eval.gradient;
            memory.push(s, y);
            bits = trial;
            point = cand;
            iteration += 1;
            inner += 1;
            push(&mut records, iteration, &point, alpha, mu);
            if stalled && inf_norm(&point.gradient) <= STALL_TOLERANCE * (1.0 + inf_norm(&point.eval.gradient)) {
                break;
            }
        }
        if mu <= config.mu_final * (1.0 + 1e-9) {
            break;
        }
        mu = (mu * config.mu_decrease_factor).max(config.mu_final);
        outer += 1;
        let eval = point.eval.clone();
        point = BarrierPoint::new(instance, &bits, mu, eval)?;
    }

    let lambda = mu / point.slack;
    let mu_bounds: Vec<f64> = bits.iter().map(|b| mu / b).collect();
    let mut kkt = KktCertificate::from_multipliers(point.eval.gradient.as_slice(), &bits, lambda, mu_bounds);
    kkt.interior_slack = point.slack;

    // Spread the leftover slack evenly; F is nonincreasing in every coordinate.
    let share = point.slack / bits.len() as f64;
    let saturated: Vec<f64> = bits.iter().map(|b| b + share).collect();
    let mut final_objective = point.eval.objective;
    let bits = match instance.objective(&saturated) {
        Ok(f) if f <= final_objective => {
            final_objective = f;
            saturated
        }
        _ => bits,
    };
    let trace = SolveTrace {
        solver: SolverKind::Barrier,
        records,
        final_objective,
        final_bits: BitVector::from_iterate(bits),
        termination,
        certificate: None,
        elapsed_secs: clock.elapsed().as_secs_f64(),
    };
    Ok((trace, kkt))
}
