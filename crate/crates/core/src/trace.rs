//! Per-iteration solver records and their line-delimited serialization.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BitVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    FrankWolfe,
    Barrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GapConverged,
    KktConverged,
    MaxIterations,
    TimeLimit,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::GapConverged | Termination::KktConverged)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::GapConverged => "gap-converged",
            Termination::KktConverged => "kkt-converged",
            Termination::MaxIterations => "max-iterations",
            Termination::TimeLimit => "time-limit",
        }
    }
}

/// One solver iteration.
///
/// `gap` is the Frank–Wolfe gap for FW runs and the barrier-gradient
/// infinity norm for barrier runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub gap: f64,
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub elapsed_secs: f64,
}

/// Computable form of the `O(1/√T)` Frank–Wolfe rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    pub min_gap: f64,
    /// Upper bound on `F(b⁽⁰⁾) − F*`, using `F* ≥ max{0, maxₜ F(b⁽ᵗ⁾) − gₜ}`.
    pub h0_estimate: f64,
    pub lipschitz: f64,
    pub budget: f64,
    /// Index `T` of the last recorded iterate.
    pub iterations: usize,
    /// `max{2h₀, 2LB²} / √(T+1)`.
    pub bound: f64,
}

impl GapCertificate {
    pub fn from_records(records: &[IterationRecord], lipschitz: f64, budget: f64) -> Option<Self> {
        let first = records.first()?;
        let min_gap = records.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
        let lower = records.iter().map(|r| r.objective - r.gap).fold(0.0, f64::max);
        let h0_estimate = (first.objective - lower).max(0.0);
        let iterations = records.len() - 1;
        let bound = (2.0 * h0_estimate).max(2.0 * lipschitz * budget * budget)
            / ((iterations + 1) as f64).sqrt();
        Some(Self {
            min_gap,
            h0_estimate,
            lipschitz,
            budget,
            iterations,
            bound,
        })
    }

    pub fn holds(&self) -> bool {
        self.min_gap <= self.bound
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveTrace {
    pub solver: SolverKind,
    pub records: Vec<IterationRecord>,
    pub final_bits: BitVector,
    pub final_objective: f64,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<GapCertificate>,
    pub elapsed_secs: f64,
}

impl SolveTrace {
    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn min_gap(&self) -> f64 {
        self.records.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min)
    }

    /// One JSON object per iteration.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(|e| Error::Serialize(e.to_string()))?;
            out.write_all(b"\n")
                .map_err(|e| Error::Serialize(e.to_string()))?;
        }
        Ok(())
    }
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<IterationRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Serialize(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::Serialize(format!("line {}: {e}", i + 1)))?;
        records.push(rec);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(iteration: usize, objective: f64, gap: f64) -> IterationRecord {
        IterationRecord {
            iteration,
            objective,
            gap,
            step: 0.1,
            vertex: Some(iteration % 2),
            lipschitz_estimate: None,
            mu: None,
            elapsed_secs: 0.0,
        }
    }

    #[test]
    fn certificate_uses_last_index() {
        let records = vec![rec(0, 3.0, 5.0), rec(1, 2.0, 1.0), rec(2, 1.5, 2.0), rec(3, 1.2, 0.5)];
        let c = GapCertificate::from_records(&records, 0.5, 1.0).unwrap();
        assert_eq!(c.iterations, 3);
        assert_eq!(c.min_gap, 0.5);
        assert!((c.h0_estimate - 2.0).abs() < 1e-15);
        assert!((c.bound - 4.0 / 2.0).abs() < 1e-15);
        assert!(c.holds());
    }

    #[test]
    fn jsonl_round_trip() {
        let trace = SolveTrace {
            solver: SolverKind::FrankWolfe,
            records: vec![rec(0, 1.0, 0.5), rec(1, 0.9, 0.25)],
            final_bits: BitVector::zeros(2),
            final_objective: 0.9,
            termination: Termination::MaxIterations,
            certificate: None,
            elapsed_secs: 0.0,
        };
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, trace.records);
    }
}
