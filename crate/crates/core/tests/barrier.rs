mod common;

use approx::assert_relative_eq;
use bitalloc::{barrier_objective, solve_barrier, BarrierConfig, BitVector, Error, InstanceKind, InstanceSpec, Termination};

#[test]
fn barrier_gradient_matches_differences() {
    let mut rng = common::rng(21);
    let inst = common::random_instance(&mut rng, 4, 7);
    let b = common::interior_point(&mut rng, inst.budget(), 7);
    let mu = 0.3;
    let (_, g) = barrier_objective(&inst, &b, mu).unwrap();
    let h = 1e-6;
    for i in 0..7 {
        let mut plus = b.clone();
        let mut minus = b.clone();
        plus[i] += h;
        minus[i] -= h;
        let fd = (barrier_objective(&inst, &plus, mu).unwrap().0 - barrier_objective(&inst, &minus, mu).unwrap().0)
            / (2.0 * h);
        assert_relative_eq!(fd, g[i], max_relative = 1e-6);
    }
}

fn check_run(inst: &bitalloc::ProblemInstance) {
    let (trace, kkt) = solve_barrier(inst, &BarrierConfig::default(), None).unwrap();
    assert_eq!(trace.termination, Termination::KktConverged);
    let budget = inst.budget();
    let bits = &trace.final_bits;
    assert!(bits.iter().all(|b| *b > 0.0));
    assert!((budget - bits.total()).abs() <= 1e-9 * budget);
    assert!(trace.final_objective <= trace.records.last().unwrap().objective);

    assert!(kkt.lambda >= 0.0);
    assert!(kkt.mu_bounds.iter().all(|m| *m >= 0.0));
    assert!(kkt.stationarity_residual <= 1e-5 * (1.0 + kkt.gradient_inf_norm));
    assert!(kkt.complementarity_residual <= 1e-6);

    // objective at the end of each barrier stage
    let mut stage_ends = Vec::new();
    for w in trace.records.windows(2) {
        if w[0].mu != w[1].mu {
            stage_ends.push(w[0].objective);
        }
    }
    stage_ends.push(trace.records.last().unwrap().objective);
    for w in stage_ends.windows(2) {
        assert!(w[1] <= w[0] + 1e-10, "outer objective rose from {} to {}", w[0], w[1]);
    }
}

#[test]
fn random_instances_converge_with_kkt_certificate() {
    let mut rng = common::rng(22);
    for (d, m) in [(2, 3), (5, 9), (8, 16)] {
        check_run(&common::random_instance(&mut rng, d, m));
    }
}

#[test]
fn grid_instance_converges() {
    let mut spec = InstanceSpec::new(InstanceKind::GridLaplacian, 13, 13);
    spec.seed = 5;
    check_run(&bitalloc::generate(&spec).unwrap());
}

#[test]
fn boundary_start_is_rejected() {
    let mut rng = common::rng(23);
    let inst = common::identity_instance(&mut rng, 2, 3);
    let start = BitVector::new(vec![inst.budget() / 3.0; 3]).unwrap();
    assert!(matches!(
        solve_barrier(&inst, &BarrierConfig::default(), Some(&start)),
        Err(Error::NotInterior(_))
    ));
    let start = BitVector::new(vec![0.0, 1.0, 1.0]).unwrap();
    assert!(solve_barrier(&inst, &BarrierConfig::default(), Some(&start)).is_err());
}

#[test]
fn zero_time_limit_reports_termination() {
    let mut rng = common::rng(24);
    let inst = common::identity_instance(&mut rng, 3, 5);
    let cfg = BarrierConfig {
        time_limit: std::time::Duration::ZERO,
        ..BarrierConfig::default()
    };
    let (trace, _) = solve_barrier(&inst, &cfg, None).unwrap();
    assert_eq!(trace.termination, Termination::TimeLimit);
}
