use alloc::vec::Vec;

use super::field::GridFunction;
use super::grid::Grid;
use super::kernel::Kernel;
use crate::error::{Error, Result};
use crate::math;

fn check_spacing(k: &Kernel, g: &Grid) -> Result<()> {
    if k.half_width() != g.cells_per_unit() {
        return Err(Error::SpacingMismatch { grid_h: g.h(), kernel_h: k.h() });
    }
    Ok(())
}

/// `sum_j a_j u(x_i - jh)`, summed left to right over the stencil.
#[inline]
pub(crate) fn stencil_sum(masses: &[f64], window: &[f64]) -> f64 {
    masses.iter().zip(window).fold(0.0, |s, (a, v)| s + a * v)
}

/// `L[u]` at node `i`, reading through the extension rule near the ends.
pub fn apply_at(k: &Kernel, u: &GridFunction, i: usize) -> Result<f64> {
    let n = k.half_width();
    let len = u.len();
    let masses = k.masses();
    if i >= n && i + n < len {
        return Ok(stencil_sum(masses, &u.values()[i - n..=i + n]) - u.at(i));
    }
    let mut s = 0.0;
    for (q, a) in masses.iter().enumerate() {
        s += a * u.at_index(i as isize - n as isize + q as isize)?;
    }
    Ok(s - u.at(i))
}

/// `L[u] = J*u - u` at every node. The output carries no extension.
pub fn nonlocal_apply(k: &Kernel, u: &GridFunction) -> Result<GridFunction> {
    check_spacing(k, u.grid())?;
    let values = (0..u.len()).map(|i| apply_at(k, u, i)).collect::<Result<Vec<_>>>()?;
    GridFunction::new(*u.grid(), values)
}

/// Truncated operator `L_R^psi[v]`: interior sources read `v`, band sources read `psi`.
///
/// `psi` may live on any grid with the same spacing that covers the band of `v`'s grid
/// (directly or through its extension). Band entries of the output are zero.
pub fn nonlocal_dirichlet_apply(k: &Kernel, v: &GridFunction, psi: &GridFunction) -> Result<GridFunction> {
    let g = *v.grid();
    check_spacing(k, &g)?;
    check_spacing(k, psi.grid())?;
    let merged = merge_band(&g, v.values(), psi)?;
    let n = k.half_width();
    let mut out = alloc::vec![0.0; g.len()];
    for i in g.interior() {
        out[i] = stencil_sum(k.masses(), &merged[i - n..=i + n]) - merged[i];
    }
    GridFunction::new(g, out)
}

/// Interior values from `interior`, band values read from `psi` at the band coordinates.
pub(crate) fn merge_band(g: &Grid, interior: &[f64], psi: &GridFunction) -> Result<Vec<f64>> {
    let mut merged = interior.to_vec();
    for (i, slot) in merged.iter_mut().enumerate() {
        if g.is_band(i) {
            let x = g.x(i);
            *slot = psi.eval(x).map_err(|_| Error::MissingOuterData { x })?;
        }
    }
    Ok(merged)
}

/// `c_eps`: kernel mass on `1 - eps <= |y| <= 1`.
///
/// Integrates the piecewise-linear interpolant of the normalized weights, so it agrees with the
/// lattice trapezoid sum whenever `1 - eps` is a node and stays positive for any `eps > 0`.
pub fn annulus_mass(k: &Kernel, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter { name: "eps", value: eps, reason: "must lie in (0, 1)" });
    }
    let n = k.half_width();
    let h = k.h();
    let w = |j: usize| k.weight(j as isize);
    let start = 1.0 - eps;
    let s = start * n as f64;
    let j0 = math::floor(s) as usize;
    let t = s - j0 as f64;
    let mut total = 0.0;
    if t > 1e-12 {
        // partial cell [start, (j0 + 1) h]
        let w_start = (1.0 - t) * w(j0) + t * w(j0 + 1);
        total += 0.5 * (w_start + w(j0 + 1)) * (1.0 - t) * h;
    } else {
        total += 0.0;
    }
    let first_full = if t > 1e-12 { j0 + 1 } else { j0 };
    for j in first_full..n {
        total += 0.5 * (w(j) + w(j + 1)) * h;
    }
    Ok(2.0 * total)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SandwichViolation {
    pub x: f64,
    pub slack: f64,
}

/// Nodewise check of `psi(x) - psi(|x|+1) <= -L[psi](x) <= psi(x) - c_eps psi(|x|+1-eps)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SandwichReport {
    pub eps: f64,
    pub c_eps: f64,
    pub nodes_checked: usize,
    pub min_lower_slack: f64,
    pub min_upper_slack: f64,
    /// Largest per-node tolerance applied (rounding plus interpolation error).
    pub max_tolerance: f64,
    pub lower_violations: Vec<SandwichViolation>,
    pub upper_violations: Vec<SandwichViolation>,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.lower_violations.is_empty() && self.upper_violations.is_empty()
    }
}

/// Verifies the two-sided bound at interior nodes. `psi` must be nondecreasing in `|x|`.
pub fn sandwich_check(k: &Kernel, psi: &GridFunction, eps: f64) -> Result<SandwichReport> {
    let g = *psi.grid();
    check_spacing(k, &g)?;
    let c_eps = annulus_mass(k, eps)?;
    let c = g.center();
    let v = psi.values();
    for d in 0..g.half_len() {
        for (inner, outer) in [(c + d, c + d + 1), (c - d, c - d - 1)] {
            let tol = 1e-12 * (1.0 + v[inner].abs());
            if v[outer] < v[inner] - tol {
                return Err(Error::NotMonotone { inner: g.x(inner).abs(), outer: g.x(outer).abs() });
            }
        }
    }
    let second_diff = |i: usize| {
        if i == 0 || i + 1 >= g.len() {
            0.0
        } else {
            (v[i + 1] - 2.0 * v[i] + v[i - 1]).abs()
        }
    };
    let mut report = SandwichReport {
        eps,
        c_eps,
        nodes_checked: 0,
        min_lower_slack: f64::INFINITY,
        min_upper_slack: f64::INFINITY,
        max_tolerance: 0.0,
        lower_violations: Vec::new(),
        upper_violations: Vec::new(),
    };
    for i in g.interior() {
        let x = g.x(i);
        let dir = if x < 0.0 { -1.0 } else { 1.0 };
        let minus_l = -apply_at(k, psi, i)?;
        let far = psi.eval(x + dir)?;
        let near_pt = x + dir * (1.0 - eps);
        let near = psi.eval(near_pt)?;
        let s = near_pt * g.cells_per_unit() as f64 + c as f64;
        let cell = math::floor(s) as usize;
        let interp = second_diff(cell).max(second_diff((cell + 1).min(g.len() - 1))) / 8.0;
        let scale = v[i].abs() + far.abs();
        let tol = 1e-10 * (1.0 + scale) + c_eps * interp;
        report.max_tolerance = report.max_tolerance.max(tol);
        let lower = minus_l - (v[i] - far);
        let upper = (v[i] - c_eps * near) - minus_l;
        report.min_lower_slack = report.min_lower_slack.min(lower);
        report.min_upper_slack = report.min_upper_slack.min(upper);
        if lower < -tol {
            report.lower_violations.push(SandwichViolation { x, slack: lower });
        }
        if upper < -tol {
            report.upper_violations.push(SandwichViolation { x, slack: upper });
        }
        report.nodes_checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_kernel::field::Extension;
    use crate::grid_kernel::kernel::{build_kernel, KernelProfile};
    use proptest::prelude::*;

    fn setup(h: f64, r: f64) -> (Grid, Kernel) {
        (Grid::new(r, h).unwrap(), build_kernel(KernelProfile::Biweight, h).unwrap())
    }

    /// `2 * int_{1-eps}^{1} (15/16)(1-y^2)^2 dy` in closed form.
    fn biweight_annulus_oracle(eps: f64) -> f64 {
        let prim = |y: f64| y - 2.0 * y * y * y / 3.0 + y.powi(5) / 5.0;
        2.0 * 15.0 / 16.0 * (prim(1.0) - prim(1.0 - eps))
    }

    #[test]
    fn constants_are_annihilated() {
        let (g, k) = setup(0.01, 8.0);
        let u = GridFunction::constant(g, 5.0).unwrap();
        let lu = nonlocal_apply(&k, &u).unwrap();
        assert!(lu.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn quadratic_gives_second_moment() {
        let h = 0.01;
        let (g, k) = setup(h, 8.0);
        let u = GridFunction::from_fn(g, |x| x * x).unwrap();
        let lu = nonlocal_apply(&k, &u).unwrap();
        for v in lu.values() {
            assert!((v - 1.0 / 7.0).abs() <= 5.0 * h * h, "{v}");
        }
    }

    #[test]
    fn missing_extension_names_the_node() {
        let (g, k) = setup(0.1, 2.0);
        let u = GridFunction::new(g, alloc::vec![1.0; g.len()]).unwrap();
        match nonlocal_apply(&k, &u) {
            Err(Error::StencilOutOfDomain { node, .. }) => assert_eq!(node, -10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dirichlet_matches_full_operator_on_own_extension() {
        let (g, k) = setup(0.02, 4.0);
        let u = GridFunction::from_fn(g, |x| (x * 0.7).sin() + x * x).unwrap();
        let full = nonlocal_apply(&k, &u).unwrap();
        let trunc = nonlocal_dirichlet_apply(&k, &u, &u).unwrap();
        for i in g.interior() {
            assert!((full.at(i) - trunc.at(i)).abs() <= 1e-12);
        }
    }

    #[test]
    fn dirichlet_constant_with_zero_outer() {
        let (g, k) = setup(0.02, 4.0);
        let v = GridFunction::constant(g, 3.0).unwrap();
        let zero = GridFunction::constant(g, 0.0).unwrap();
        let out = nonlocal_dirichlet_apply(&k, &v, &zero).unwrap();
        for i in g.interior() {
            assert!(out.at(i) <= 1e-15);
            if g.x(i).abs() <= 3.0 - 1e-9 {
                assert!(out.at(i).abs() < 1e-12);
            }
        }
        let one = GridFunction::constant(g, 1.0).unwrap();
        let zero_v = GridFunction::constant(g, 0.0).unwrap();
        let out = nonlocal_dirichlet_apply(&k, &zero_v, &one).unwrap();
        for i in g.interior() {
            assert!(out.at(i) >= 0.0);
            if g.x(i).abs() <= 3.0 + 1e-9 {
                assert_eq!(out.at(i), 0.0);
            }
        }
    }

    #[test]
    fn dirichlet_requires_band_coverage() {
        let (g, k) = setup(0.1, 4.0);
        let small = Grid::new(2.0, 0.1).unwrap();
        let v = GridFunction::constant(g, 0.0).unwrap();
        let psi = GridFunction::new(small, alloc::vec![1.0; small.len()]).unwrap();
        assert!(matches!(nonlocal_dirichlet_apply(&k, &v, &psi), Err(Error::MissingOuterData { .. })));
    }

    #[test]
    fn annulus_mass_oracle() {
        let k = build_kernel(KernelProfile::Biweight, 1e-5).unwrap();
        let c = annulus_mass(&k, 0.5).unwrap();
        assert!((c - biweight_annulus_oracle(0.5)).abs() < 1e-10, "{c}");
        let coarse = build_kernel(KernelProfile::Biweight, 0.01).unwrap();
        let c = annulus_mass(&coarse, 0.5).unwrap();
        assert!((c - biweight_annulus_oracle(0.5)).abs() < 0.5 * 0.01 * 0.01);
        let tiny = annulus_mass(&coarse, 1e-9).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-6);
        let full = annulus_mass(&coarse, 1.0 - 1e-9).unwrap();
        assert!((full - 1.0).abs() < 1e-6 && full < 1.0);
        assert!(annulus_mass(&coarse, 1.0).is_err());
    }

    #[test]
    fn sandwich_for_abs_and_exp() {
        let (g, k) = setup(0.01, 8.0);
        for psi in [
            GridFunction::from_fn(g, |x: f64| x.abs()).unwrap(),
            GridFunction::from_fn(g, |x: f64| x.abs().exp()).unwrap(),
        ] {
            let r = sandwich_check(&k, &psi, 0.5).unwrap();
            assert!(r.holds(), "{r:?}");
            assert_eq!(r.nodes_checked, g.interior().count());
        }
        let flat = GridFunction::constant(g, 2.0).unwrap();
        let r = sandwich_check(&k, &flat, 0.5).unwrap();
        assert!(r.holds());
        assert!(r.min_lower_slack.abs() < 1e-12);
    }

    #[test]
    fn sandwich_rejects_non_monotone() {
        let (g, k) = setup(0.1, 3.0);
        let psi = GridFunction::from_fn(g, |x: f64| (x * 2.0).cos()).unwrap();
        assert!(matches!(sandwich_check(&k, &psi, 0.5), Err(Error::NotMonotone { .. })));
    }

    #[test]
    fn convex_profiles_have_nonpositive_minus_l() {
        let (g, k) = setup(0.01, 8.0);
        let profiles: [fn(f64) -> f64; 3] = [|x| x * x, |x| x.abs(), |x| x.cosh()];
        for p in profiles {
            let u = GridFunction::from_fn(g, p).unwrap();
            let lu = nonlocal_apply(&k, &u).unwrap();
            assert!(lu.values().iter().all(|v| -v <= 1e-10));
        }
    }

    #[test]
    fn bounded_gradient_estimate() {
        let (g, k) = setup(0.02, 4.0);
        let u = GridFunction::from_fn(g, |x: f64| (1.3 * x).sin() + 0.2 * x * x).unwrap();
        let lu = nonlocal_apply(&k, &u).unwrap();
        let n = k.half_width() as isize;
        let h = g.h();
        for i in 0..g.len() {
            let mut sup = 0.0f64;
            for j in -n..=n {
                let idx = i as isize + j;
                let d = (u.at_index(idx + 1).unwrap() - u.at_index(idx - 1).unwrap()) / (2.0 * h);
                sup = sup.max(d.abs());
            }
            assert!(lu.at(i).abs() <= sup + 2.0 * h);
        }
    }

    fn small_grid() -> (Grid, Kernel) {
        setup(0.1, 2.0)
    }

    proptest! {
        #[test]
        fn linearity(u in proptest::collection::vec(-5.0f64..5.0, 61), v in proptest::collection::vec(-5.0f64..5.0, 61), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let (g, k) = small_grid();
            let uf = GridFunction::new(g, u.clone()).unwrap().with_extension(Extension::Linear);
            let vf = GridFunction::new(g, v.clone()).unwrap().with_extension(Extension::Linear);
            let comb: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let cf = GridFunction::new(g, comb).unwrap().with_extension(Extension::Linear);
            let (lu, lv, lc) = (nonlocal_apply(&k, &uf).unwrap(), nonlocal_apply(&k, &vf).unwrap(), nonlocal_apply(&k, &cf).unwrap());
            for i in 0..g.len() {
                prop_assert!((lc.at(i) - a * lu.at(i) - b * lv.at(i)).abs() < 1e-10);
            }
        }

        #[test]
        fn touching_monotonicity(v in proptest::collection::vec(-5.0f64..5.0, 61), gap in proptest::collection::vec(0.0f64..2.0, 61), touch in 0usize..61) {
            let (g, k) = small_grid();
            let mut u = v.clone();
            for (ui, d) in u.iter_mut().zip(&gap) { *ui += d; }
            u[touch] = v[touch];
            let uf = GridFunction::new(g, u).unwrap().with_extension(Extension::Constant);
            let vf = GridFunction::new(g, v.clone()).unwrap().with_extension(Extension::Constant);
            // constant continuation preserves the ordering outside as well
            let lu = apply_at(&k, &uf, touch).unwrap();
            let lv = apply_at(&k, &vf, touch).unwrap();
            prop_assert!(lu >= lv - 1e-12);
        }
    }
}
