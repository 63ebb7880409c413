//! Frank–Wolfe over the budget simplex `{b ≥ 0, 1ᵀb ≤ B}`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BitVector, Evaluation, ProblemInstance};
use crate::trace::{GapCertificate, IterationRecord, SolveTrace, SolverKind, Termination};

const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// `γ = min{g / (2LB²), 1}`.
    ShortStep,
    /// Backtracking estimate `L̂ ≤ L`: halve, then double until sufficient decrease.
    AdaptiveLipschitz,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FwConfig {
    pub max_iterations: usize,
    pub gap_tolerance: f64,
    #[serde(with = "secs")]
    pub time_limit: Duration,
    pub step_rule: StepRule,
    pub lipschitz_override: Option<f64>,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gap_tolerance: 1e-6,
            time_limit: Duration::from_secs(600),
            step_rule: StepRule::ShortStep,
            lipschitz_override: None,
        }
    }
}

impl FwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.gap_tolerance > 0.0) {
            return Err(Error::Config("gap_tolerance must be positive".into()));
        }
        if let Some(l) = self.lipschitz_override {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config("lipschitz_override must be positive".into()));
            }
        }
        Ok(())
    }
}

pub(crate) mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// A vertex of the budget simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vertex {
    Origin,
    /// `B·eᵢ`.
    Corner(usize),
}

impl Vertex {
    pub fn index(self) -> Option<usize> {
        match self {
            Vertex::Origin => None,
            Vertex::Corner(i) => Some(i),
        }
    }

    pub fn to_bits(self, m: usize, budget: f64) -> BitVector {
        let mut v = vec![0.0; m];
        if let Vertex::Corner(i) = self {
            v[i] = budget;
        }
        BitVector::from_iterate(v)
    }

    /// `⟨g, s⟩` for this vertex.
    pub fn inner(self, gradient: &[f64], budget: f64) -> f64 {
        match self {
            Vertex::Origin => 0.0,
            Vertex::Corner(i) => budget * gradient[i],
        }
    }
}

/// Closed-form linear minimization oracle; ties go to the lowest index.
pub fn lmo_vertex(gradient: &[f64]) -> Result<Vertex> {
    if gradient.is_empty() {
        return Err(Error::EmptyGradient);
    }
    let mut best = 0;
    for (i, &g) in gradient.iter().enumerate().skip(1) {
        if g < gradient[best] {
            best = i;
        }
    }
    Ok(if gradient[best] < 0.0 {
        Vertex::Corner(best)
    } else {
        Vertex::Origin
    })
}

pub fn lmo(gradient: &[f64], budget: f64) -> Result<BitVector> {
    Ok(lmo_vertex(gradient)?.to_bits(gradient.len(), budget))
}

/// `⟨b, g⟩ − B·min(0, minᵢ gᵢ)`.
pub fn fw_gap(bits: &[f64], gradient: &[f64], budget: f64) -> f64 {
    let dot: f64 = bits.iter().zip(gradient).map(|(b, g)| b * g).sum();
    let min = gradient.iter().copied().fold(f64::INFINITY, f64::min);
    dot - budget * min.min(0.0)
}

/// `⟨b − s, g⟩` with `s` from the oracle.
pub fn fw_gap_via_vertex(bits: &[f64], gradient: &[f64], budget: f64) -> Result<f64> {
    let s = lmo_vertex(gradient)?;
    let dot: f64 = bits.iter().zip(gradient).map(|(b, g)| b * g).sum();
    Ok(dot - s.inner(gradient, budget))
}

fn step_towards(bits: &[f64], vertex: Vertex, gamma: f64, budget: f64) -> Vec<f64> {
    let mut next: Vec<f64> = bits.iter().map(|b| (1.0 - gamma) * b).collect();
    if let Vertex::Corner(i) = vertex {
        next[i] += gamma * budget;
    }
    next
}

pub fn solve_fw(
    instance: &ProblemInstance,
    config: &FwConfig,
    start: Option<&BitVector>,
) -> Result<SolveTrace> {
    config.validate()?;
    let m = instance.sensors();
    let budget = instance.budget();
    let bits0 = match start {
        Some(s) => {
            if !s.is_feasible_for(instance, FEASIBILITY_TOL) {
                return Err(Error::Infeasible("Frank-Wolfe start is outside the budget simplex".into()));
            }
            s.as_slice().to_vec()
        }
        None => vec![0.0; m],
    };
    let lipschitz = config
        .lipschitz_override
        .unwrap_or_else(|| instance.lipschitz_constant());
    let two_b2 = 2.0 * budget * budget;

    let clock = Instant::now();
    let mut bits = bits0;
    let mut eval: Evaluation = instance.evaluate(&bits).map_err(|e| e.at_iteration(0))?;
    let mut lhat = 1.0_f64.min(lipschitz);
    let mut records = Vec::new();
    let termination;
    let mut t = 0usize;
    loop {
        let grad = eval.gradient.as_slice();
        let vertex = lmo_vertex(grad)?;
        let gap = fw_gap(&bits, grad, budget);
        let mut record = IterationRecord {
            iteration: t,
            objective: eval.objective,
            gap,
            step: 0.0,
            vertex: vertex.index(),
            lipschitz_estimate: None,
            mu: None,
            elapsed_secs: clock.elapsed().as_secs_f64(),
        };
        if gap <= config.gap_tolerance {
            records.push(record);
            termination = Termination::GapConverged;
            break;
        }
        if t >= config.max_iterations {
            records.push(record);
            termination = Termination::MaxIterations;
            break;
        }
        if clock.elapsed() >= config.time_limit {
            records.push(record);
            termination = Termination::TimeLimit;
            break;
        }

        let (gamma, next_bits, next_eval) = match config.step_rule {
            StepRule::ShortStep => {
                let gamma = (gap / (lipschitz * two_b2)).min(1.0);
                let next = step_towards(&bits, vertex, gamma, budget);
                let e = instance.evaluate(&next).map_err(|e| e.at_iteration(t + 1))?;
                (gamma, next, e)
            }
            StepRule::AdaptiveLipschitz => {
                lhat = (lhat * 0.5).min(lipschitz);
                loop {
                    let gamma = (gap / (lhat * two_b2)).min(1.0);
                    let next = step_towards(&bits, vertex, gamma, budget);
                    let e = instance.evaluate(&next).map_err(|e| e.at_iteration(t + 1))?;
                    if e.objective <= eval.objective - 0.5 * gamma * gap || lhat >= lipschitz {
                        break (gamma, next, e);
                    }
                    lhat = (2.0 * lhat).min(lipschitz);
                }
            }
        };
        record.step = gamma;
        if config.step_rule == StepRule::AdaptiveLipschitz {
            record.lipschitz_estimate = Some(lhat);
        }
        records.push(record);
        bits = next_bits;
        eval = next_eval;
        t += 1;
    }

    let certificate = GapCertificate::from_records(&records, lipschitz, budget);
    Ok(SolveTrace {
        solver: SolverKind::FrankWolfe,
        final_objective: eval.objective,
        final_bits: BitVector::from_iterate(bits),
        records,
        termination,
        certificate,
        elapsed_secs: clock.elapsed().as_secs_f64(),
    })
}
