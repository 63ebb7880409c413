use approx::assert_relative_eq;
use bitalloc::linalg::{cholesky, symmetric_spectral_norm};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spd(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_iterator(n, n, entries.iter().copied().cycle().take(n * n));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agrees_with_nalgebra(n in 1usize..20, entries in prop::collection::vec(-2.0f64..2.0, 1..400)) {
        let a = spd(n, &entries);
        let ours = cholesky(a.clone()).unwrap();
        let reference = a.clone().cholesky().unwrap();
        prop_assert!((ours.lower() - reference.l()).amax() <= 1e-10 * a.amax());

        let rhs = DVector::from_fn(n, |i, _| i as f64 - 1.5);
        prop_assert!((ours.solve(&rhs) - reference.solve(&rhs)).amax() <= 1e-8 * (1.0 + rhs.amax()));
        let inv = ours.inverse();
        prop_assert!((&a * &inv - DMatrix::identity(n, n)).amax() <= 1e-8);
    }
}

#[test]
fn indefinite_matrix_is_rejected() {
    let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert!(cholesky(a).is_err());
}

#[test]
fn spectral_norm_of_known_matrix() {
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    assert_relative_eq!(symmetric_spectral_norm(&a), 3.0, max_relative = 1e-12);
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![-5.0, 1.0, 2.0]));
    assert_relative_eq!(symmetric_spectral_norm(&b), 5.0, max_relative = 1e-12);
}
