#![allow(dead_code)]

use bitalloc::ProblemInstance;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian sensing matrix, κ ~ U(0.8, 1.2), random SPD prior, B = 2m.
pub fn random_instance(rng: &mut ChaCha8Rng, d: usize, m: usize) -> ProblemInstance {
    let h = DMatrix::from_fn(m, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let kappa = DVector::from_fn(m, |_, _| rng.random_range(0.8..1.2));
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let prior = &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.5;
    ProblemInstance::new(h, prior, kappa, 2.0 * m as f64).unwrap()
}

pub fn identity_instance(rng: &mut ChaCha8Rng, d: usize, m: usize) -> ProblemInstance {
    let h = DMatrix::from_fn(m, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let kappa = DVector::from_fn(m, |_, _| rng.random_range(0.8..1.2));
    ProblemInstance::with_identity_prior(h, kappa, 2.0 * m as f64).unwrap()
}

/// A point with every component positive and `1ᵀb` strictly inside the budget.
pub fn interior_point(rng: &mut ChaCha8Rng, budget: f64, m: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let fill = rng.random_range(0.3..0.95);
    w.iter().map(|x| fill * budget * x / total).collect()
}
