//! Largest-remainder rounding of a budget-saturated continuous allocation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BitVector, ProblemInstance};

/// Allowed gap between `1ᵀb̄` and `B`.
pub const SATURATION_TOL: f64 = 1e-6;
const NEGATIVE_TOL: f64 = 1e-12;
/// Largest `m` accepted by the brute-force nearest-point check.
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rounded {
    pub bits: Vec<u64>,
    /// `r = b̄ − ⌊b̄⌋`.
    pub remainders: Vec<f64>,
    pub residual_budget: u64,
    /// `ξ`: which coordinates were rounded up.
    pub rounded_up: Vec<bool>,
}

impl Rounded {
    pub fn bit_vector(&self) -> BitVector {
        BitVector::from_integers(&self.bits)
    }

    /// `Σ rᵢ(1 − rᵢ)`.
    pub fn distance_bound(&self) -> f64 {
        self.remainders.iter().map(|r| r * (1.0 - r)).sum()
    }
}

fn integral_budget(budget: f64) -> Result<u64> {
    let rounded = budget.round();
    if !(budget >= 0.0) || (budget - rounded).abs() > 1e-9 {
        return Err(Error::Infeasible(format!(
            "integral rounding needs an integer budget, got {budget}"
        )));
    }
    Ok(rounded as u64)
}

/// Floors every component, then rounds up the `R_rem` largest remainders.
/// Ties among remainders go to the lowest index.
pub fn round_largest_remainder(b_bar: &[f64], budget: f64) -> Result<Rounded> {
    let total_budget = integral_budget(budget)?;
    if let Some((i, b)) = b_bar
        .iter()
        .enumerate()
        .find(|(_, b)| !b.is_finite() || **b < -NEGATIVE_TOL)
    {
        return Err(Error::Infeasible(format!("component {i} = {b} is negative")));
    }
    let total: f64 = b_bar.iter().sum();
    if (total - budget).abs() > SATURATION_TOL * budget.max(1.0) {
        return Err(Error::Infeasible(format!(
            "allocation sums to {total}, not the budget {budget}"
        )));
    }
    let mut floors = Vec::with_capacity(b_bar.len());
    let mut remainders = Vec::with_capacity(b_bar.len());
    for &b in b_bar {
        let b = b.max(0.0);
        let f = b.floor();
        floors.push(f as u64);
        remainders.push(b - f);
    }
    let floor_sum: u64 = floors.iter().sum();
    let residual_budget = total_budget.checked_sub(floor_sum).ok_or_else(|| {
        Error::Infeasible(format!("floored allocation {floor_sum} exceeds budget {total_budget}"))
    })?;
    if residual_budget as usize > b_bar.len() {
        return Err(Error::Infeasible(format!(
            "residual budget {residual_budget} exceeds the number of channels"
        )));
    }

    let mut order: Vec<usize> = (0..b_bar.len()).collect();
    // stable: equal remainders keep index order
    order.sort_by(|&a, &b| remainders[b].total_cmp(&remainders[a]));
    let mut rounded_up = vec![false; b_bar.len()];
    let mut bits = floors;
    for &i in order.iter().take(residual_budget as usize) {
        rounded_up[i] = true;
        bits[i] += 1;
    }
    Ok(Rounded {
        bits,
        remainders,
        residual_budget,
        rounded_up,
    })
}

/// Brute-force check that `rounded` is a nearest point among all
/// `⌊b̄⌋ + ξ`, `ξ ∈ {0,1}^m`, `1ᵀξ = R_rem`.
pub fn verify_nearest_point(b_bar: &[f64], rounded: &Rounded) -> Result<bool> {
    let m = b_bar.len();
    if m > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            what: "brute-force nearest-point check",
            size: m,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let floors: Vec<f64> = b_bar.iter().map(|b| b.max(0.0).floor()).collect();
    let dist = |xi: &dyn Fn(usize) -> bool| -> f64 {
        (0..m)
            .map(|i| {
                let v = floors[i] + if xi(i) { 1.0 } else { 0.0 } - b_bar[i];
                v * v
            })
            .sum()
    };
    let ours = dist(&|i| rounded.rounded_up[i]);
    let k = rounded.residual_budget as u32;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << m) {
        if mask.count_ones() != k {
            continue;
        }
        best = best.min(dist(&|i| mask & (1 << i) != 0));
    }
    if best.is_infinite() {
        // no admissible ξ exists only when R_rem > m, which rounding rejects
        return Ok(false);
    }
    Ok(ours <= best + 1e-12)
}

/// `(L/2) Σ rᵢ(1 − rᵢ)` and the looser `(L/2) min{R_rem, m/4}`.
pub fn rounding_gap_bound(rounded: &Rounded, lipschitz: f64) -> (f64, f64) {
    let m = rounded.remainders.len() as f64;
    let tight = 0.5 * lipschitz * rounded.distance_bound();
    let simple = 0.5 * lipschitz * (rounded.residual_budget as f64).min(m / 4.0);
    (tight, simple)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundingReport {
    pub rounded_bits: BitVector,
    pub remainder_vector: Vec<f64>,
    pub residual_budget: u64,
    /// `‖b̂ − b̄‖²`.
    pub distance_squared: f64,
    pub distance_bound: f64,
    pub gap_bound: f64,
    pub simplified_gap_bound: f64,
    pub relaxed_objective: f64,
    pub rounded_objective: f64,
    /// `F(b̂) − F(b̄)`.
    pub gap_actual: f64,
}

impl RoundingReport {
    /// `gap_actual / gap_bound`, zero when the bound vanishes.
    pub fn gap_ratio(&self) -> f64 {
        if self.gap_bound > 0.0 {
            self.gap_actual / self.gap_bound
        } else {
            0.0
        }
    }
}

/// Rounds `b̄` for `instance` and evaluates both allocations.
pub fn round_and_report(instance: &ProblemInstance, b_bar: &[f64]) -> Result<RoundingReport> {
    let rounded = round_largest_remainder(b_bar, instance.budget())?;
    let rounded_bits = rounded.bit_vector();
    let distance_squared = rounded_bits
        .iter()
        .zip(b_bar)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let (gap_bound, simplified_gap_bound) = rounding_gap_bound(&rounded, instance.lipschitz_constant());
    let relaxed_objective = instance.objective(b_bar)?;
    let rounded_objective = instance.objective(&rounded_bits)?;
    Ok(RoundingReport {
        distance_bound: rounded.distance_bound(),
        remainder_vector: rounded.remainders,
        residual_budget: rounded.residual_budget,
        rounded_bits,
        distance_squared,
        gap_bound,
        simplified_gap_bound,
        relaxed_objective,
        rounded_objective,
        gap_actual: rounded_objective - relaxed_objective,
    })
}
