mod common;

use bitalloc::quantizer::ks_uniform_distance;
use bitalloc::{quantize, simulate_lmmse, uniform_allocation, DitherMode, InstanceKind, InstanceSpec, QuantizerBank};
use proptest::prelude::*;

fn instance() -> bitalloc::ProblemInstance {
    let mut spec = InstanceSpec::new(InstanceKind::RandomGaussian, 5, 8);
    spec.seed = 77;
    bitalloc::generate(&spec).unwrap()
}

#[test]
fn same_seed_same_report() {
    let inst = instance();
    let bits = uniform_allocation(&inst);
    let bank = QuantizerBank::for_allocation(&inst, &bits, DitherMode::Subtractive, 9).unwrap();
    let a = simulate_lmmse(&inst, &bits, 5_000, &bank, 4).unwrap();
    let b = simulate_lmmse(&inst, &bits, 5_000, &bank, 4).unwrap();
    assert_eq!(a, b);
    let other = QuantizerBank::for_allocation(&inst, &bits, DitherMode::Subtractive, 10).unwrap();
    let c = simulate_lmmse(&inst, &bits, 5_000, &other, 4).unwrap();
    assert_ne!(a.empirical_mse, c.empirical_mse);
}

#[test]
fn subtractive_mode_matches_analytic_mse() {
    let inst = instance();
    let bits = uniform_allocation(&inst);
    let bank = QuantizerBank::for_allocation(&inst, &bits, DitherMode::Subtractive, 3).unwrap();
    let r = simulate_lmmse(&inst, &bits, 40_000, &bank, 8).unwrap();
    assert_eq!(r.analytic_mse, inst.objective(&bits).unwrap());
    assert!(r.mse_z_score() <= 4.0, "z = {}", r.mse_z_score());
    assert!(r.max_ks_distance <= 0.02);
}

#[test]
fn fine_quantization_approaches_the_prior_free_limit() {
    let inst = instance();
    let bits = vec![14.0; inst.sensors()];
    let bank = QuantizerBank::for_allocation(&inst, &bits, DitherMode::NonSubtractive, 4).unwrap();
    let r = simulate_lmmse(&inst, &bits, 2_000, &bank, 2).unwrap();
    assert!(r.analytic_mse < 1e-6);
    assert!(r.empirical_mse < 1e-6);
}

#[test]
fn bad_bank_is_rejected() {
    assert!(QuantizerBank::new(vec![1.0, 0.0], DitherMode::Subtractive, 0).is_err());
    let inst = instance();
    let bank = QuantizerBank::new(vec![1.0; 3], DitherMode::Subtractive, 0).unwrap();
    assert!(simulate_lmmse(&inst, &vec![2.0; 8], 10, &bank, 1).is_err());
}

#[test]
fn ks_distance_of_a_grid() {
    let mut grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0 - 0.5).collect();
    assert!(ks_uniform_distance(&mut grid) <= 1e-3 + 1e-12);
    let mut clumped = vec![0.0; 100];
    assert!((ks_uniform_distance(&mut clumped) - 0.5).abs() < 1e-12);
}

proptest! {
    #[test]
    fn subtractive_error_is_within_half_a_bin(
        v in -50.0f64..50.0,
        width in 1e-3f64..5.0,
        u in -0.5f64..0.5,
    ) {
        let dither = u * width;
        let e = quantize(v, width, dither, DitherMode::Subtractive) - v;
        prop_assert!(e.abs() <= 0.5 * width * (1.0 + 1e-9));
        let q = quantize(v, width, dither, DitherMode::NonSubtractive);
        let level = q / width - 0.5;
        prop_assert!((level - level.round()).abs() < 1e-6);
    }
}
