//! Vanishing-discount pipeline for the ergodic constant and the growth-class certificates.

mod classes;
mod lipschitz;
mod march;

use alloc::format;
use alloc::vec::Vec;

pub use classes::{
    certify_lower_bound, class_membership, transform_supersolution_checks, transformed_residual,
    LowerBoundReport, MembershipReport, NodeViolation, Transform, TransformReport,
};
pub use lipschitz::{lambda_lipschitz_experiment, LipschitzReport};
pub use march::{time_marching_slope, SlopeOutcome, SlopeReport};

use crate::error::{Error, Result};
use crate::grid_kernel::{GridFunction, Kernel};
use crate::math;
use crate::problem::{
    build_psi, build_theta, check_hypotheses, residual_ep, Barriers, GradientScheme, HypothesisReport, HypothesisScan,
    Profile, Psi, PsiBar, ScanOptions, SourceFamily, SourceSpec, Theta,
};
use crate::solver::{solve_truncated, source_values, Boundary, SolveOutcome, SolverConfig};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ErgodicConfig {
    /// Template; `sigma` is overwritten per schedule entry and `radius` is `R_0`.
    pub solver: SolverConfig,
    /// Strictly decreasing, positive.
    pub sigma_schedule: Vec<f64>,
    /// `R_k = R_0 + radius_step * k`.
    pub radius_step: f64,
    /// Reach of the onset scans for `R_star` and `R_upper`.
    pub horizon: f64,
    /// Run the (H0)-(H2) sampler before solving.
    pub check_admissibility: bool,
}

impl Default for ErgodicConfig {
    fn default() -> Self {
        ErgodicConfig {
            solver: SolverConfig::default(),
            sigma_schedule: default_schedule(),
            radius_step: 2.0,
            horizon: 32.0,
            check_admissibility: true,
        }
    }
}

/// `0.5 * 2^-k` for `k = 0..=6`.
pub fn default_schedule() -> Vec<f64> {
    (0..=6).map(|k| 0.5 * math::powf(2.0, -(k as f64))).collect()
}

impl ErgodicConfig {
    pub fn radius_at(&self, k: usize) -> f64 {
        self.solver.radius + self.radius_step * k as f64
    }

    pub fn largest_radius(&self) -> f64 {
        self.radius_at(self.sigma_schedule.len().saturating_sub(1))
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.sigma_schedule.is_empty() {
            return Err(Error::Precondition { reason: "sigma schedule is empty".into() });
        }
        for pair in self.sigma_schedule.windows(2) {
            if !(pair[1] < pair[0]) {
                return Err(Error::Precondition { reason: format!("sigma schedule must decrease strictly: {} then {}", pair[0], pair[1]) });
            }
        }
        if !(self.sigma_schedule[self.sigma_schedule.len() - 1] > 0.0) {
            return Err(Error::Precondition { reason: "sigma values must be positive".into() });
        }
        if !(self.radius_step >= 0.0) {
            return Err(Error::InvalidParameter { name: "radius_step", value: self.radius_step, reason: "must be nonnegative" });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SigmaRow {
    pub sigma: f64,
    pub radius: f64,
    pub lambda_sigma: f64,
    pub residual: f64,
    pub iterations: usize,
    /// `theta_0 <= v <= psi_0` at every node.
    pub sandwich_ok: bool,
    pub sandwich_violations: usize,
    /// `lambda_sigma` within `[-c1, c2 + sigma PsiBar(0)]`.
    pub lambda_bound_ok: bool,
    /// `sup w / Psi` over `0 < |x| <= R - 1`.
    pub mu_fit: f64,
    /// `sup (Theta - w)` over `|x| <= R - 1`.
    pub m_fit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Extrapolation {
    Richardson,
    /// Richardson iterates did not settle; the smallest-sigma value is used.
    RawFallback,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LambdaStar {
    pub value: f64,
    pub error: f64,
    pub method: Extrapolation,
    pub iterates: Vec<f64>,
}

/// `lambda_sigma = lambda* + C sigma`; pairwise Richardson with fallback to the raw value.
pub fn extrapolate(table: &[(f64, f64)], numeric_floor: f64) -> LambdaStar {
    let raw = table.last().map(|r| r.1).unwrap_or(f64::NAN);
    let iterates: Vec<f64> = table
        .windows(2)
        .map(|w| {
            let ((s0, l0), (s1, l1)) = (w[0], w[1]);
            (s0 * l1 - s1 * l0) / (s0 - s1)
        })
        .collect();
    let floor = numeric_floor * (1.0 + math::abs(raw));
    let n = iterates.len();
    if n == 0 {
        return LambdaStar { value: raw, error: floor, method: Extrapolation::RawFallback, iterates };
    }
    let last = iterates[n - 1];
    let raw_step = if table.len() >= 2 { math::abs(table[table.len() - 1].1 - table[table.len() - 2].1) } else { 0.0 };
    let settled = n < 2 || math::abs(iterates[n - 1] - iterates[n - 2]) <= raw_step.max(floor);
    if settled {
        LambdaStar { value: last, error: math::abs(last - raw) + floor, method: Extrapolation::Richardson, iterates }
    } else {
        LambdaStar { value: raw, error: 2.0 * raw_step + math::abs(last - raw) + floor, method: Extrapolation::RawFallback, iterates }
    }
}

#[derive(Clone, Debug)]
pub struct ErgodicResult {
    pub spec: SourceSpec,
    pub sigma_table: Vec<SigmaRow>,
    pub lambda_star: LambdaStar,
    /// `w = v - v(0)` at the smallest sigma.
    pub w_profile: GridFunction,
    pub v_profile: GridFunction,
    /// Nodewise residual of the last discounted solve.
    pub residual_profile: GridFunction,
    pub theta: Theta,
    pub psi: Option<Psi>,
    pub barriers: Option<Barriers>,
    pub c1: f64,
    pub c2: f64,
    pub min_f: f64,
    /// `2 + (min f)^-`.
    pub mu0: f64,
    /// `sup w / Psi` at the smallest sigma.
    pub mu_growth: f64,
    /// `inf (w - Theta)`; `M = -lower_gap`.
    pub lower_gap: f64,
    pub big_m: f64,
    pub lambda_star_above_min_f: bool,
    pub class: Option<MembershipReport>,
    pub hypotheses: Option<HypothesisReport>,
}

impl ErgodicResult {
    /// `Psi` sampled on the `w_profile` grid (zero for the constant family).
    pub fn psi_profile(&self) -> Result<GridFunction> {
        match &self.psi {
            Some(p) => p.sample(*self.w_profile.grid()),
            None => GridFunction::constant(*self.w_profile.grid(), 0.0),
        }
    }

    pub fn theta_profile(&self) -> Result<GridFunction> {
        self.theta.sample(*self.w_profile.grid())
    }

    /// `w_profile` on `|x| <= R - 1`, where it is solution rather than outer data.
    pub fn w_core(&self) -> Result<GridFunction> {
        self.w_profile.restrict(self.w_profile.grid().radius() - 2.0)
    }

    pub fn all_sandwiches_hold(&self) -> bool {
        self.sigma_table.iter().all(|r| r.sandwich_ok && r.lambda_bound_ok)
    }
}

struct Setup {
    theta: Theta,
    psi: Option<Psi>,
    psi_bar: Option<PsiBar>,
    barriers: Option<Barriers>,
    c1: f64,
    c2: f64,
}

fn is_constant(spec: &SourceSpec) -> bool {
    matches!(spec.family, SourceFamily::Constant { .. })
}

fn setup(spec: &SourceSpec, cfg: &ErgodicConfig, kernel: &Kernel) -> Result<Setup> {
    let min_f = spec.min_value();
    let c1 = math::neg_part(min_f) + 1.0;
    if is_constant(spec) {
        return Ok(Setup { theta: Theta::zero(), psi: None, psi_bar: None, barriers: None, c1, c2: math::pos(min_f) + 1.0 });
    }
    let scan = ScanOptions::new(cfg.solver.h, cfg.horizon.max(cfg.largest_radius() + 2.0))?;
    let theta = build_theta(spec, min_f.min(0.0), 1.0, &scan)?;
    let (psi, barriers) = build_psi(spec, 0.0, &scan)?;
    let psi_bar = PsiBar::new(&psi, barriers.r_star);

    // c2 makes PsiBar + c2/sigma a discrete supersolution for every sigma in the schedule.
    let mut big = cfg.solver.clone();
    big.radius = cfg.largest_radius();
    let grid = big.grid()?;
    let bar = psi_bar.sample(grid)?;
    let op = residual_ep(0.0, &bar, spec, kernel, GradientScheme::Godunov)?;
    let f = source_values(&big, spec, &grid)?;
    let mut worst = 0.0f64;
    for i in grid.interior() {
        let x = grid.x(i);
        let operator = op.residual.at(i) + spec.value(x)?;
        for &s in &cfg.sigma_schedule {
            worst = worst.max(f[i] + s * (theta.value(x) - bar.at(i)) - operator);
        }
    }
    if !worst.is_finite() {
        return Err(Error::NonFinite { context: "supersolution constant c2", x: grid.radius() });
    }
    Ok(Setup { theta, psi: Some(psi), psi_bar: Some(psi_bar), barriers: Some(barriers), c1, c2: worst + 1.0 })
}

/// Runs the discounted solves along the schedule and extrapolates `lambda*`.
pub fn estimate_lambda_star(spec: &SourceSpec, cfg: &ErgodicConfig) -> Result<ErgodicResult> {
    spec.validate()?;
    cfg.validate()?;
    if spec.m != cfg.solver.m {
        return Err(Error::InvalidParameter { name: "m", value: spec.m, reason: "source exponent differs from solver exponent" });
    }
    let hypotheses = if cfg.check_admissibility && !is_constant(spec) {
        let report = check_hypotheses(spec, &HypothesisScan::default());
        if !report.admissible() {
            let failing: Vec<_> = report.results.iter().take(3).filter(|r| !r.verdict.is_pass()).map(|r| r.hypothesis).collect();
            return Err(Error::Precondition { reason: format!("source is not admissible: {failing:?} do not pass") });
        }
        Some(report)
    } else {
        None
    };
    let kernel = cfg.solver.kernel()?;
    let st = setup(spec, cfg, &kernel)?;
    let constant = is_constant(spec);
    let min_f = spec.min_value();

    let mut rows = Vec::with_capacity(cfg.sigma_schedule.len());
    let mut last = None;
    for (k, &sigma) in cfg.sigma_schedule.iter().enumerate() {
        let solver = SolverConfig { sigma, radius: cfg.radius_at(k), ..cfg.solver.clone() };
        let grid = solver.grid()?;
        let theta = st.theta.sample(grid)?;
        let (c1, c2) = (st.c1, st.c2);
        let bar = match &st.psi_bar {
            Some(b) => b.sample(grid)?,
            None => GridFunction::constant(grid, 0.0)?,
        };
        let psi0 = {
            let b = st.psi_bar.clone();
            let shift = if constant { min_f / sigma } else { c2 / sigma };
            GridFunction::from_fn(grid, move |x| b.as_ref().map_or(0.0, |b| b.value(x)) + shift)?
        };
        let theta0 = if constant { psi0.clone() } else { theta.map(|_, t| t - c1 / sigma)? };
        let outcome = solve_truncated(&solver, 0.0, spec, Some(&theta), &Boundary::outer(psi0.clone()), Some(&theta0))?;
        let out = match outcome {
            SolveOutcome::Converged(out) => out,
            SolveOutcome::Diverged(report) => return Err(Error::Diverged(alloc::boxed::Box::new(report))),
        };

        let data_sup = out.forcing.values().iter().fold(0.0f64, |a, b| a.max(math::abs(*b)));
        let slack = 2.0 * solver.tol * (1.0 + data_sup) / sigma;
        let lower = theta.map(|_, t| t - c1 / sigma)?;
        let violations = (0..grid.len())
            .filter(|&i| out.v.at(i) < lower.at(i) - slack || out.v.at(i) > psi0.at(i) + slack)
            .count();
        let lambda_sigma = out.lambda_sigma();
        let lam_tol = sigma * slack;
        let lambda_bound_ok = lambda_sigma >= -c1 - lam_tol && lambda_sigma <= c2 + sigma * bar.at_zero() + lam_tol;

        let psi_grid = match &st.psi {
            Some(p) => Some(p.sample(grid)?),
            None => None,
        };
        // Band values are outer data, not solution; fit the growth constants inside |x| <= R - 1.
        let mut mu_fit = 0.0f64;
        let mut m_fit = f64::NEG_INFINITY;
        for i in (0..grid.len()).filter(|&i| math::abs(grid.x(i)) <= solver.radius - 1.0 + 1e-12) {
            m_fit = m_fit.max(theta.at(i) - out.w.at(i));
            if let Some(p) = &psi_grid {
                if p.at(i) > 0.0 {
                    mu_fit = mu_fit.max(out.w.at(i) / p.at(i));
                }
            }
        }
        rows.push(SigmaRow {
            sigma,
            radius: solver.radius,
            lambda_sigma,
            residual: out.final_residual_sup,
            iterations: out.iterations,
            sandwich_ok: violations == 0,
            sandwich_violations: violations,
            lambda_bound_ok,
            mu_fit,
            m_fit,
        });
        last = Some(out);
    }
    let out = last.expect("schedule is nonempty");
    let table: Vec<(f64, f64)> = rows.iter().map(|r| (r.sigma, r.lambda_sigma)).collect();
    let lambda_star = extrapolate(&table, 10.0 * cfg.solver.tol);

    let final_row = rows.last().expect("schedule is nonempty");
    let mu0 = 2.0 + math::neg_part(min_f);
    // The class test needs a core strictly inside the band-influenced zone.
    let core_radius = out.v.grid().radius() - 2.0;
    let class = match &st.psi {
        Some(p) if core_radius > 0.0 => Some(class_membership(&out.w.restrict(core_radius)?, p, mu0)?),
        _ => None,
    };
    Ok(ErgodicResult {
        spec: spec.clone(),
        lambda_star_above_min_f: lambda_star.value >= min_f - lambda_star.error,
        mu_growth: final_row.mu_fit,
        lower_gap: -final_row.m_fit,
        big_m: final_row.m_fit,
        sigma_table: rows,
        lambda_star,
        w_profile: out.w,
        v_profile: out.v,
        residual_profile: out.residual,
        theta: st.theta,
        psi: st.psi,
        barriers: st.barriers,
        c1: st.c1,
        c2: st.c2,
        min_f,
        mu0,
        class,
        hypotheses,
    })
}

#[cfg(test)]
mod tests;
