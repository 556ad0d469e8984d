use super::*;
use crate::real::Wide;
use approx::assert_abs_diff_eq;

fn cfg(radius: f64, h: f64, sigma: f64) -> SolverConfig {
    SolverConfig { radius, h, sigma, ..SolverConfig::default() }
}

fn constant_outer(cfg: &SolverConfig, c: f64) -> Boundary {
    Boundary::outer(GridFunction::constant(cfg.grid().unwrap(), c).unwrap())
}

#[test]
fn godunov_power_examples() {
    let g = Grid::new(2.0, 0.1).unwrap();
    let flat = GridFunction::constant(g, 3.0).unwrap();
    assert!(godunov_gradient_power(&flat, 3.0).values().iter().all(|&x| x == 0.0));

    let cone = GridFunction::new(g, g.nodes().map(f64::abs).collect()).unwrap();
    let p = godunov_gradient_power(&cone, 3.0);
    for (i, x) in g.nodes().enumerate() {
        let want = if i == g.center() { 0.0 } else { 1.0 };
        assert_abs_diff_eq!(p.at(i), want, epsilon = 1e-9);
        let _ = x;
    }
    let tent = GridFunction::new(g, g.nodes().map(|x| -x.abs()).collect()).unwrap();
    assert_abs_diff_eq!(godunov_gradient_power(&tent, 3.0).at_zero(), 1.0, epsilon = 1e-9);
}

#[test]
fn constant_source_solves_exactly() {
    for sigma in [0.5, 0.25, 0.125] {
        let c = SolverConfig { tol: 1e-13, ..cfg(8.0, 0.02, sigma) };
        let spec = SourceSpec::constant(3.0, 3.0).unwrap();
        let out = solve_truncated(&c, 0.0, &spec, None, &constant_outer(&c, 3.0 / sigma), None)
            .unwrap()
            .converged()
            .unwrap();
        for &v in out.v.values() {
            assert_abs_diff_eq!(v, 3.0 / sigma, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(out.lambda_sigma(), 3.0, epsilon = 1e-8);
        assert!(out.gradient_sup_interior < 1e-6);
    }
}

#[test]
fn output_invariants() {
    let c = cfg(4.0, 0.05, 0.5);
    let spec = SourceSpec::power(1.0, 2.0, 3.0).unwrap().with_shift(1.0);
    let outer = GridFunction::from_fn(c.grid().unwrap(), |x| 2.0 * x.abs() + 4.0).unwrap();
    let boundary = Boundary::outer(outer);
    let out = solve_truncated(&c, 0.0, &spec, None, &boundary, None).unwrap().converged().unwrap();
    assert_eq!(out.w.at_zero(), 0.0);
    let g = out.v.grid();
    for i in 0..g.len() {
        if g.x(i).abs() <= g.radius() - 1.0 {
            assert!(out.mu_profile.at(i).abs() <= 1e-12);
        }
    }
    assert!(out.mu_profile.values().iter().any(|&m| m != 0.0));
    let again = build_problem(&c, 0.0, &spec, None, &boundary).unwrap().residual(out.v.values());
    assert_eq!(again.0, out.final_residual_sup);
    assert!(out.final_residual_sup < c.tol);
}

#[test]
fn discounted_requires_zero_lambda() {
    let c = cfg(4.0, 0.05, 0.5);
    let spec = SourceSpec::constant(1.0, 3.0).unwrap();
    let err = solve_truncated(&c, 1.0, &spec, None, &constant_outer(&c, 2.0), None).unwrap_err();
    assert!(matches!(err, Error::Precondition { .. }));
}

#[test]
fn invalid_config_is_rejected() {
    for bad in [
        SolverConfig { m: 2.0, ..SolverConfig::default() },
        SolverConfig { radius: 1.0, ..SolverConfig::default() },
        SolverConfig { sigma: -1.0, ..SolverConfig::default() },
        SolverConfig { tol: 0.0, ..SolverConfig::default() },
        SolverConfig { h: 0.03, ..SolverConfig::default() },
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn explicit_policy_agrees_with_sweeps() {
    let base = SolverConfig { tol: 1e-10, ..cfg(2.0, 0.1, 0.5) };
    let spec = SourceSpec::power(1.0, 2.0, 3.0).unwrap().with_shift(1.0);
    let boundary = Boundary::outer(GridFunction::from_fn(base.grid().unwrap(), |x| x.abs() + 3.0).unwrap());
    let gs = solve_truncated(&base, 0.0, &spec, None, &boundary, None).unwrap().converged().unwrap();
    let explicit = SolverConfig { step_policy: StepPolicy::Adaptive { margin: 0.9 }, ..base };
    let ex = solve_truncated(&explicit, 0.0, &spec, None, &boundary, None).unwrap().converged().unwrap();
    for (a, b) in gs.v.values().iter().zip(ex.v.values()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-7);
    }
}

#[test]
fn wide_iteration_matches_f64() {
    let c = cfg(3.0, 0.05, 0.25);
    let spec = SourceSpec::power(1.0, 2.0, 3.0).unwrap().with_shift(1.0);
    let boundary = Boundary::outer(GridFunction::from_fn(c.grid().unwrap(), |x| 2.0 * x * x + 4.0).unwrap());
    let p = build_problem(&c, 0.0, &spec, None, &boundary).unwrap();
    let grid = *p.grid();
    let k = c.kernel().unwrap();
    let band: Vec<Wide> = grid.nodes().map(|x| Wide::from_f64(2.0 * x * x + 4.0)).collect();
    let rhs: Vec<Wide> = (0..grid.len()).map(|i| Wide::from_f64(p.forcing(i))).collect();
    let scale = (0..grid.len()).map(|i| Wide::from_f64(1.0 + p.forcing(i).abs())).collect();
    let pw = TruncatedProblem::new(grid, &k, 3.0, 0.25, 0.0, rhs, scale, band).unwrap();
    let a = iterate(&c, &p, &alloc::vec![0.0; grid.len()]).unwrap();
    let b = iterate(&c, &pw, &alloc::vec![Wide::zero(); grid.len()]).unwrap();
    for (x, y) in a.v.iter().zip(&b.v) {
        assert_abs_diff_eq!(*x, y.to_f64(), epsilon = 1e-6);
    }
}

#[test]
fn budget_exhaustion_is_an_error() {
    let c = SolverConfig { max_iters: 20, ..cfg(4.0, 0.05, 0.01) };
    let spec = SourceSpec::constant(1.0, 3.0).unwrap();
    let err = solve_truncated(&c, 0.0, &spec, None, &constant_outer(&c, 100.0), None).unwrap_err();
    assert!(matches!(err, Error::NotConverged { .. }));
}

#[test]
fn blowup_is_reported_as_data() {
    let c = SolverConfig { blowup_threshold: 50.0, ..cfg(4.0, 0.05, 0.01) };
    let spec = SourceSpec::constant(1.0, 3.0).unwrap();
    match solve_truncated(&c, 0.0, &spec, None, &constant_outer(&c, 100.0), None).unwrap() {
        SolveOutcome::Diverged(r) => assert!(r.v_at_zero > 50.0),
        SolveOutcome::Converged(_) => panic!("expected divergence"),
    }
}

#[test]
fn dirichlet_values_override_band() {
    let c = cfg(2.0, 0.1, 0.5);
    let spec = SourceSpec::constant(1.0, 3.0).unwrap();
    let b = Boundary { outer: GridFunction::constant(c.grid().unwrap(), 2.0).unwrap(), g: Some([5.0, 7.0]) };
    let out = solve_truncated(&c, 0.0, &spec, None, &b, None).unwrap().converged().unwrap();
    let g = out.v.grid();
    assert_eq!(out.v.at(g.center() - g.radius_cells()), 5.0);
    assert_eq!(out.v.at(g.center() + g.radius_cells()), 7.0);
    assert_eq!(out.v.at(0), 2.0);
}

#[test]
fn mollified_solutions_converge() {
    let spec = SourceSpec::exp_linear(1.0, 1.0, 3.0).unwrap();
    let base = SolverConfig { tol: 1e-10, ..cfg(3.0, 0.02, 0.5) };
    let boundary = Boundary::outer(GridFunction::from_fn(base.grid().unwrap(), |x| 4.0 * x.abs() + 8.0).unwrap());
    let run = |r: Option<f64>| {
        let c = SolverConfig { mollifier_radius: r, ..base.clone() };
        solve_truncated(&c, 0.0, &spec, None, &boundary, None).unwrap().converged().unwrap().v
    };
    let exact = run(None);
    let errs: Vec<f64> = [0.4, 0.2, 0.1]
        .iter()
        .map(|&r| run(Some(r)).sub(&exact).unwrap().sup_abs_within(2.0))
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn gradient_bound_constant_and_skipped() {
    let c = SolverConfig { tol: 1e-12, ..cfg(4.0, 0.05, 0.5) };
    let spec = SourceSpec::constant(2.0, 3.0).unwrap();
    let out = solve_truncated(&c, 0.0, &spec, None, &constant_outer(&c, 4.0), None).unwrap();
    let rep = gradient_bound_check(&out, 2.0).unwrap();
    assert!(rep.holds && rep.x_sup < 1e-6 && rep.skipped.is_none());

    let diverged = SolveOutcome::Diverged(DivergenceReport {
        reason: "test".into(),
        iterations: 1,
        residual_trace: Vec::new(),
        v_at_zero: 1e13,
        radius: 4.0,
    });
    let rep = gradient_bound_check(&diverged, 2.0).unwrap();
    assert!(rep.skipped.is_some() && !rep.holds);
}

#[test]
fn gradient_bound_is_mesh_stable() {
    let spec = SourceSpec::power(1.0, 2.0, 3.0).unwrap().with_shift(1.0);
    let xs: Vec<f64> = [0.04, 0.02]
        .iter()
        .map(|&h| {
            let c = cfg(5.0, h, 0.5);
            let outer = GridFunction::from_fn(c.grid().unwrap(), |x| 2.0 * x.abs() * (1.0 + x * x).cbrt() + 6.0).unwrap();
            let out = solve_truncated(&c, 0.0, &spec, None, &Boundary::outer(outer), None).unwrap();
            let rep = gradient_bound_check(&out, 3.0).unwrap();
            assert!(rep.holds, "{rep:?}");
            rep.x_sup
        })
        .collect();
    assert!((xs[0] - xs[1]).abs() <= 0.1 * xs[1], "{xs:?}");
}

#[test]
fn linear_aux_zero_data() {
    let c = SolverConfig { epsilon: 0.1, ..cfg(4.0, 0.05, 0.0) };
    let zero = GridFunction::constant(c.grid().unwrap(), 0.0).unwrap();
    let out = solve_linear_aux(&c, &zero, 0.0).unwrap();
    assert_eq!(out.sup_rho, 0.0);
}

/// Dense Gaussian elimination on the interior unknowns.
fn dense_oracle(c: &SolverConfig, f: f64, g: f64) -> Vec<f64> {
    let grid = c.grid().unwrap();
    let k = c.kernel().unwrap();
    let h = grid.h();
    let idx: Vec<usize> = grid.interior().collect();
    let n = idx.len();
    let first = idx[0];
    let mut a = alloc::vec![alloc::vec![0.0; n + 1]; n];
    let visc = c.epsilon / (h * h);
    for (r, &i) in idx.iter().enumerate() {
        a[r][n] = f;
        let coeff = |node: usize, w: f64, a: &mut Vec<Vec<f64>>| {
            if grid.is_interior(node) {
                a[r][node - first] += w;
            } else {
                a[r][n] -= w * g;
            }
        };
        coeff(i, 1.0 + 2.0 * visc, &mut a);
        coeff(i - 1, -visc, &mut a);
        coeff(i + 1, -visc, &mut a);
        let hw = k.half_width() as isize;
        for j in -hw..=hw {
            coeff((i as isize - j) as usize, -k.mass_at(j), &mut a);
        }
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
        a.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= factor * p;
            }
        }
    }
    let mut x = alloc::vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][n] - s) / a[row][row];
    }
    x
}

#[test]
fn linear_aux_matches_dense_solve() {
    // R = 4, h = 0.05: 201 nodes.
    let c = SolverConfig { epsilon: 0.1, tol: 1e-12, ..cfg(4.0, 0.05, 0.0) };
    let grid = c.grid().unwrap();
    assert_eq!(grid.len(), 201);
    let one = GridFunction::constant(grid, 1.0).unwrap();
    let out = solve_linear_aux(&c, &one, 0.0).unwrap();
    let oracle = dense_oracle(&c, 1.0, 0.0);
    for (r, i) in grid.interior().enumerate() {
        assert_abs_diff_eq!(out.rho.at(i), oracle[r], epsilon = 1e-8);
    }
    assert!(out.bound_holds && out.sup_rho <= out.c_bound);
    assert!(out.spectral_radius > 0.0 && out.spectral_radius < 1.0);
}

#[test]
fn linear_aux_gives_strict_supersolution() {
    let c = SolverConfig { epsilon: 0.1, tol: 1e-11, ..cfg(4.0, 0.05, 0.0) };
    let grid = c.grid().unwrap();
    let spec = SourceSpec::power(1.0, 2.0, 3.0).unwrap().with_shift(1.0);
    let lambda = 0.5;
    let sup_f = grid.nodes().filter(|x| x.abs() < 4.0).map(|x| 1.0 + x * x).fold(0.0, f64::max);
    let big_m = sup_f + lambda + 1.0;
    let out = solve_linear_aux(&c, &GridFunction::constant(grid, big_m).unwrap(), 0.0).unwrap();
    let p = build_problem(&c, lambda, &spec, None, &Boundary::outer(GridFunction::constant(grid, 0.0).unwrap())).unwrap();
    for i in grid.interior() {
        assert!(p.node_residual(out.rho.values(), i) > 0.0);
    }
}

#[test]
fn linear_aux_budget_reports_spectral_radius() {
    let c = SolverConfig { max_iters: 30, tol: 1e-12, ..cfg(4.0, 0.05, 0.0) };
    let one = GridFunction::constant(c.grid().unwrap(), 1.0).unwrap();
    match solve_linear_aux(&c, &one, 0.0).unwrap_err() {
        Error::NotConverged { spectral_radius: Some(r), .. } => assert!(r > 0.9 && r < 1.0),
        e => panic!("{e:?}"),
    }
}
