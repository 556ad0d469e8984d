use super::*;
use crate::grid_kernel::build_kernel;
use crate::grid_kernel::KernelProfile;
use approx::assert_abs_diff_eq;

fn quick() -> ErgodicConfig {
    ErgodicConfig {
        solver: SolverConfig { h: 0.05, radius: 6.0, ..SolverConfig::default() },
        sigma_schedule: alloc::vec![0.5, 0.25, 0.125, 0.0625],
        radius_step: 1.0,
        ..ErgodicConfig::default()
    }
}

fn quadratic() -> SourceSpec {
    SourceSpec::power(1.0, 2.0, 3.0).unwrap().with_shift(1.0)
}

#[test]
fn richardson_is_exact_on_linear_data() {
    let table: Vec<(f64, f64)> = [0.5, 0.25, 0.125].iter().map(|&s| (s, 2.0 + 3.0 * s)).collect();
    let est = extrapolate(&table, 0.0);
    assert_eq!(est.method, Extrapolation::Richardson);
    assert_abs_diff_eq!(est.value, 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(est.error, 0.375, epsilon = 1e-12);
}

#[test]
fn richardson_falls_back_when_unsettled() {
    let table = [(0.5, 1.0), (0.25, 3.0), (0.125, 1.0)];
    let est = extrapolate(&table, 0.0);
    assert_eq!(est.method, Extrapolation::RawFallback);
    assert_eq!(est.value, 1.0);
    assert!(est.error >= 4.0);
}

#[test]
fn schedule_must_decrease() {
    let cfg = ErgodicConfig { sigma_schedule: alloc::vec![0.5, 0.5], ..quick() };
    assert!(cfg.validate().is_err());
    assert_eq!(default_schedule().len(), 7);
    assert_eq!(default_schedule()[6], 0.5 / 64.0);
}

#[test]
fn constant_source_is_exact() {
    let spec = SourceSpec::constant(3.0, 3.0).unwrap();
    let res = estimate_lambda_star(&spec, &quick()).unwrap();
    for row in &res.sigma_table {
        assert_abs_diff_eq!(row.lambda_sigma, 3.0, epsilon = 1e-8);
        assert!(row.sandwich_ok && row.lambda_bound_ok);
    }
    assert_abs_diff_eq!(res.lambda_star.value, 3.0, epsilon = 1e-8);
    assert!(res.w_profile.values().iter().all(|w| w.abs() < 1e-8));
}

#[test]
fn quadratic_pipeline() {
    let res = estimate_lambda_star(&quadratic(), &quick()).unwrap();
    assert!(res.all_sandwiches_hold(), "{:?}", res.sigma_table);
    assert!(res.lambda_star_above_min_f);
    assert!((res.lambda_star.value - 1.10).abs() < 0.02, "{:?}", res.lambda_star);
    assert!(res.lambda_star.error < 0.05);
    assert!(res.class.as_ref().unwrap().member);
    assert_eq!(res.w_profile.at_zero(), 0.0);
    // The w-sandwich holds at the fitted constants by construction.
    let theta = res.theta_profile().unwrap();
    let psi = res.psi_profile().unwrap();
    let r = res.w_profile.grid().radius();
    for i in (0..res.w_profile.len()).filter(|&i| res.w_profile.grid().x(i).abs() <= r - 1.0) {
        let w = res.w_profile.at(i);
        assert!(w >= theta.at(i) - res.big_m - 1e-12);
        assert!(w <= res.mu_growth * psi.at(i) + 1e-12);
    }
}

#[test]
fn inadmissible_source_is_rejected() {
    let spec = SourceSpec::double_exp(1.0, 4.5, 3.0).unwrap();
    assert!(matches!(estimate_lambda_star(&spec, &quick()), Err(Error::Precondition { .. })));
}

#[test]
fn time_marching_constant_slope() {
    let spec = SourceSpec::constant(2.5, 3.0).unwrap();
    let cfg = SolverConfig { h: 0.05, radius: 4.0, tol: 1e-12, ..SolverConfig::default() };
    match time_marching_slope(&spec, &cfg, 8.0, 0.25).unwrap() {
        SlopeOutcome::Converged(r) => assert_abs_diff_eq!(r.slope, 2.5, epsilon = 1e-8),
        SlopeOutcome::Diverged(d) => panic!("{d:?}"),
    }
}

#[test]
fn time_marching_detects_blowup() {
    let spec = SourceSpec::double_exp(1.0, 4.5, 3.0).unwrap();
    let cfg = SolverConfig { h: 0.05, radius: 4.0, ..SolverConfig::default() };
    assert!(matches!(time_marching_slope(&spec, &cfg, 8.0, 0.25).unwrap(), SlopeOutcome::Diverged(_)));
}

fn quad_psi(grid: crate::grid_kernel::Grid) -> (Psi, GridFunction) {
    let scan = ScanOptions::new(grid.h(), 32.0).unwrap();
    let (psi, _) = build_psi(&quadratic(), 0.0, &scan).unwrap();
    let sampled = psi.sample(grid).unwrap();
    (psi, sampled)
}

#[test]
fn membership_examples() {
    let grid = crate::grid_kernel::Grid::new(6.0, 0.05).unwrap();
    let (psi, u) = quad_psi(grid);
    let r = class_membership(&u, &psi, 1.0).unwrap();
    assert!(r.member);
    assert_abs_diff_eq!(r.sup_ratio_outer, 1.0, epsilon = 1e-12);
    let theta = Theta::new(1.0, 0.0).sample(grid).unwrap();
    assert!(class_membership(&theta, &psi, 1.0).unwrap().member);
    let double = u.map(|_, v| 2.0 * v).unwrap();
    assert!(!class_membership(&double, &psi, 1.0).unwrap().violations.is_empty());
}

#[test]
fn lower_bound_examples() {
    let grid = crate::grid_kernel::Grid::new(12.0, 0.05).unwrap();
    let (_, u) = quad_psi(grid);
    let r = certify_lower_bound(&u, &quadratic(), 0.1).unwrap();
    assert!(r.c_eta.unwrap() > 0.0 && r.witness.is_none());
    let zero = GridFunction::constant(grid, 0.0).unwrap();
    let r = certify_lower_bound(&zero, &quadratic(), 0.1).unwrap();
    assert!(r.c_eta.is_none());
    assert!(r.witness.unwrap().x.abs() > 12.0);
}

#[test]
fn identity_transforms() {
    let grid = crate::grid_kernel::Grid::new(6.0, 0.05).unwrap();
    let k = build_kernel(KernelProfile::Biweight, 0.05).unwrap();
    let u = GridFunction::new(grid, grid.nodes().map(|x| x * x).collect()).unwrap().with_extension(crate::grid_kernel::Extension::Linear);
    let base = residual_ep(1.0, &u, &quadratic(), &k, GradientScheme::Godunov).unwrap().residual;
    let (same, _) = transformed_residual(&u, &quadratic(), 1.0, Transform::Scale { a: 1.0 }, &k).unwrap();
    for i in 0..grid.len() {
        if grid.x(i).abs() <= 6.0 {
            assert_abs_diff_eq!(same.at(i), base.at(i), epsilon = 1e-12);
        }
    }
    let dist = |q: f64| {
        let (r, _) = transformed_residual(&u, &quadratic(), 1.0, Transform::Power { q }, &k).unwrap();
        (0..grid.len()).filter(|&i| grid.x(i).abs() <= 5.0).map(|i| (r.at(i) - base.at(i)).abs()).fold(0.0, f64::max)
    };
    assert!(dist(1.001) < dist(1.01) && dist(1.01) < dist(1.1));
    assert!(dist(1.0 + 1e-9) < 1e-4);
}

#[test]
fn transform_outside_domain_is_an_error() {
    let grid = crate::grid_kernel::Grid::new(2.0, 0.05).unwrap();
    let k = build_kernel(KernelProfile::Biweight, 0.05).unwrap();
    let u = GridFunction::constant(grid, 1.0).unwrap();
    let err = transformed_residual(&u, &quadratic(), 1.0, Transform::Scale { a: 4.0 }, &k).unwrap_err();
    assert!(matches!(err, Error::TransformDomain { .. }));
}

#[test]
fn power_transform_of_solution_is_supersolution_far_out() {
    let res = estimate_lambda_star(&quadratic(), &quick()).unwrap();
    let k = build_kernel(KernelProfile::Biweight, 0.05).unwrap();
    let rep = transform_supersolution_checks(&res.v_profile, &quadratic(), res.lambda_star.value, 1.05, 1.05, &k).unwrap();
    assert_eq!(rep.transform, Transform::Power { q: 1.05 });
    let r1 = rep.r1.expect("nonnegative tail");
    assert!(r1 < rep.valid_radius);
    assert!(rep.slow_constant.unwrap() >= 1.0);
}

#[test]
fn lipschitz_identical_sources() {
    let rep = lambda_lipschitz_experiment(&quadratic(), &quadratic(), &quadratic(), &quick()).unwrap();
    assert_eq!(rep.dev_ratio, 0.0);
    assert_eq!(rep.difference, 0.0);
    assert!(rep.holds);
}

#[test]
fn lipschitz_envelope_violation() {
    let shifted = SourceSpec::power(1.0, 2.0, 3.0).unwrap().with_shift(-1.0);
    let err = lambda_lipschitz_experiment(&quadratic(), &shifted, &quadratic(), &quick()).unwrap_err();
    assert!(matches!(err, Error::EnvelopeViolated { .. }));
}
