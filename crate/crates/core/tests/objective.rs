mod common;

use approx::assert_relative_eq;
use bitalloc::linalg::symmetric_spectral_norm;
use bitalloc::model::LN_4;
use bitalloc::ProblemInstance;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn central_difference(inst: &ProblemInstance, b: &[f64], i: usize, h: f64) -> f64 {
    let at = |t: f64| {
        let mut p = b.to_vec();
        p[i] += t;
        inst.objective(&p).unwrap()
    };
    (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = common::rng(1);
    for (d, m) in [(1, 1), (3, 7), (8, 5), (12, 30)] {
        let inst = common::random_instance(&mut rng, d, m);
        let b = common::interior_point(&mut rng, inst.budget(), m);
        let g = inst.evaluate(&b).unwrap().gradient;
        for i in 0..m {
            let fd = central_difference(&inst, &b, i, 1e-3);
            assert_relative_eq!(fd, g[i], max_relative = 1e-6);
        }
    }
}

#[test]
fn hessian_matches_differences_of_gradient() {
    let mut rng = common::rng(2);
    let inst = common::random_instance(&mut rng, 6, 9);
    let b = common::interior_point(&mut rng, inst.budget(), 9);
    let hess = inst.hessian_exact(&b).unwrap();
    let h = 1e-6;
    for j in 0..9 {
        let mut plus = b.clone();
        let mut minus = b.clone();
        plus[j] += h;
        minus[j] -= h;
        let col = (inst.evaluate(&plus).unwrap().gradient - inst.evaluate(&minus).unwrap().gradient) / (2.0 * h);
        for i in 0..9 {
            assert!((col[i] - hess[(i, j)]).abs() <= 1e-5 * hess.amax());
        }
    }
    assert_relative_eq!(hess.clone(), hess.transpose(), epsilon = 1e-14);
    assert!(symmetric_spectral_norm(&hess) <= inst.lipschitz_constant());
}

#[test]
fn diagonal_example() {
    let inst = ProblemInstance::with_identity_prior(
        DMatrix::identity(2, 2),
        DVector::from_element(2, 1.0),
        4.0,
    )
    .unwrap();
    let e = inst.evaluate(&[1.0, 1.0]).unwrap();
    assert_relative_eq!(e.objective, 0.4, epsilon = 1e-15);
    assert_relative_eq!(e.gradient[0], -LN_4 * 4.0 / 25.0, epsilon = 1e-15);
    assert_relative_eq!(e.gradient[1], -LN_4 * 4.0 / 25.0, epsilon = 1e-15);
}

#[test]
fn scaling_prior_scales_lipschitz() {
    let mut rng = common::rng(3);
    let inst = common::random_instance(&mut rng, 4, 6);
    let scaled = ProblemInstance::new(
        inst.sensing_matrix().clone(),
        inst.prior_covariance() * 3.0,
        inst.kappa().clone(),
        inst.budget(),
    )
    .unwrap();
    assert_relative_eq!(scaled.lipschitz_constant(), 3.0 * inst.lipschitz_constant(), max_relative = 1e-12);
}

#[test]
fn non_spd_prior_is_rejected() {
    let prior = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    let r = ProblemInstance::new(DMatrix::identity(2, 2), prior, DVector::from_element(2, 1.0), 2.0);
    assert!(r.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn objective_is_bounded_and_nonincreasing(
        seed in any::<u64>(),
        d in 1usize..6,
        m in 1usize..8,
        i in 0usize..8,
        bump in 0.0f64..2.0,
    ) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, d, m);
        let b = common::interior_point(&mut rng, inst.budget(), m);
        let f = inst.objective(&b).unwrap();
        let trace_prior = inst.prior_covariance().trace();
        prop_assert!(f > 0.0);
        prop_assert!(f <= trace_prior * (1.0 + 1e-12));
        let mut more = b.clone();
        more[i % m] += bump;
        prop_assert!(inst.objective(&more).unwrap() <= f * (1.0 + 1e-12));
        let g = inst.evaluate(&b).unwrap().gradient;
        prop_assert!(g.iter().all(|gi| *gi <= 0.0));
    }

    #[test]
    fn hessian_norm_below_lipschitz(seed in any::<u64>(), d in 1usize..6, m in 1usize..10) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, d, m);
        let b = common::interior_point(&mut rng, inst.budget(), m);
        let hess = inst.hessian_exact(&b).unwrap();
        prop_assert!(symmetric_spectral_norm(&hess) <= inst.lipschitz_constant());
    }
}
