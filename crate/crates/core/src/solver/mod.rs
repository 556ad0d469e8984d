//! Monotone fixed-point solver for the truncated problem and its auxiliaries.

mod linear;
mod problem;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use linear::{solve_linear_aux, LinearAuxOutput};
pub use problem::TruncatedProblem;

use crate::error::{Error, Result};
use crate::grid_kernel::{build_kernel, Extension, Grid, GridFunction, Kernel, KernelProfile};
use crate::math;
use crate::problem::SourceSpec;
use crate::real::Real;

/// How the interior is updated each iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "policy", rename_all = "snake_case"))]
pub enum StepPolicy {
    /// Alternating-direction nodewise exact solves (Gauss-Seidel).
    #[default]
    Sweep,
    /// Explicit step with `tau = margin / (2 eps/h^2 + 1 + sigma + m G^(m-1) 2/h)`.
    Adaptive { margin: f64 },
    /// Explicit step with a caller-chosen `tau`; no stability guarantee.
    Fixed { tau: f64 },
}


#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverConfig {
    pub m: f64,
    pub sigma: f64,
    pub epsilon: f64,
    #[cfg_attr(feature = "serde", serde(rename = "R"))]
    pub radius: f64,
    pub h: f64,
    /// Target for `sup_i |F_i| / (1 + |f_i + sigma Theta_i|)`.
    pub tol: f64,
    pub max_iters: usize,
    pub step_policy: StepPolicy,
    pub mollifier_radius: Option<f64>,
    pub kernel: KernelProfile,
    /// Iterations without residual decrease before reporting divergence.
    pub divergence_window: usize,
    /// `|v(0)|` beyond which the run is reported as divergent.
    pub blowup_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            m: 3.0,
            sigma: 0.0,
            epsilon: 0.0,
            radius: 8.0,
            h: 0.02,
            tol: 1e-8,
            max_iters: 400_000,
            step_policy: StepPolicy::Sweep,
            mollifier_radius: None,
            kernel: KernelProfile::Biweight,
            divergence_window: 500,
            blowup_threshold: 1e12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, value: f64, reason: &'static str| {
            Err(Error::InvalidParameter { name, value, reason })
        };
        if !(self.m > 2.0) || !self.m.is_finite() {
            return bad("m", self.m, "exponent must exceed 2");
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad("sigma", self.sigma, "discount must be nonnegative");
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return bad("epsilon", self.epsilon, "viscosity must be nonnegative");
        }
        if !(self.radius > 1.0) || !self.radius.is_finite() {
            return bad("R", self.radius, "truncation radius must exceed 1");
        }
        if !(self.tol > 0.0) {
            return bad("tol", self.tol, "tolerance must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters", 0.0, "iteration budget must be positive");
        }
        match self.step_policy {
            StepPolicy::Adaptive { margin } if !(margin > 0.0 && margin <= 1.0) => {
                return bad("margin", margin, "stability margin must lie in (0, 1]");
            }
            StepPolicy::Fixed { tau } if !(tau > 0.0) => {
                return bad("tau", tau, "step must be positive");
            }
            _ => {}
        }
        if let Some(r) = self.mollifier_radius {
            if !(r >= 0.0) {
                return bad("mollifier_radius", r, "radius must be nonnegative");
            }
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.radius, self.h)
    }

    pub fn kernel(&self) -> Result<Kernel> {
        build_kernel(self.kernel, self.h)
    }
}

/// Values held fixed outside the interior.
#[derive(Clone, Debug)]
pub struct Boundary {
    /// Outer condition; evaluated at band coordinates.
    pub outer: GridFunction,
    /// Dirichlet values at `x = -R` and `x = R`, overriding `outer` there.
    pub g: Option<[f64; 2]>,
}

impl Boundary {
    pub fn outer(outer: GridFunction) -> Boundary {
        Boundary { outer, g: None }
    }

    fn band_values(&self, grid: &Grid) -> Result<Vec<f64>> {
        let mut band = Vec::with_capacity(grid.len());
        for (i, x) in grid.nodes().enumerate() {
            if !grid.is_band(i) {
                band.push(0.0);
                continue;
            }
            let value = self.outer.eval(x).map_err(|_| Error::MissingOuterData { x })?;
            band.push(value);
        }
        if let Some([left, right]) = self.g {
            let r = grid.radius_cells();
            let c = grid.center();
            band[c - r] = left;
            band[c + r] = right;
        }
        Ok(band)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DivergenceReport {
    pub reason: String,
    pub iterations: usize,
    /// `(iteration, scaled residual)` at each check.
    pub residual_trace: Vec<(usize, f64)>,
    pub v_at_zero: f64,
    pub radius: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub config: SolverConfig,
    pub lambda: f64,
    pub v: GridFunction,
    /// `v - v(0)`.
    pub w: GridFunction,
    pub v_at_zero: f64,
    pub iterations: usize,
    pub final_residual_sup: f64,
    pub final_residual_abs: f64,
    /// `L_R^0[v(0)]`.
    pub mu_profile: GridFunction,
    pub gradient_sup_interior: f64,
    /// `f + sigma Theta - lambda` as used by the scheme.
    pub forcing: GridFunction,
    pub residual: GridFunction,
}

impl SolveOutput {
    /// `sigma v(0)`.
    pub fn lambda_sigma(&self) -> f64 {
        self.config.sigma * self.v_at_zero
    }
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum SolveOutcome {
    Converged(SolveOutput),
    Diverged(DivergenceReport),
}

impl SolveOutcome {
    pub fn converged(self) -> Result<SolveOutput> {
        match self {
            SolveOutcome::Converged(out) => Ok(out),
            SolveOutcome::Diverged(report) => Err(Error::Diverged(alloc::boxed::Box::new(report))),
        }
    }

    pub fn as_converged(&self) -> Option<&SolveOutput> {
        match self {
            SolveOutcome::Converged(out) => Some(out),
            SolveOutcome::Diverged(_) => None,
        }
    }
}

/// Raw iteration result over any scalar type.
#[derive(Clone, Debug)]
pub struct IterationResult<T> {
    pub v: Vec<T>,
    pub iterations: usize,
    pub residual_scaled: f64,
    pub residual_abs: f64,
    pub divergence: Option<DivergenceReport>,
}

/// Iterates `problem` from `v` until the scaled residual drops below `cfg.tol`.
///
/// Returns `NotConverged` if the budget runs out while the residual is still falling.
pub fn iterate<T: Real>(cfg: &SolverConfig, problem: &TruncatedProblem<T>, init: &[T]) -> Result<IterationResult<T>> {
    let grid = *problem.grid();
    let mut v = problem.assemble(init);
    let check_every = match cfg.step_policy {
        StepPolicy::Sweep => 10,
        _ => 50,
    };
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    let mut last = (f64::INFINITY, f64::INFINITY);
    for it in 1..=cfg.max_iters {
        match cfg.step_policy {
            StepPolicy::Sweep => problem.sweep(&mut v, it % 2 == 1),
            StepPolicy::Adaptive { margin } => {
                let g = problem.gradient_sup(&v).to_f64();
                v = problem.explicit_update(&v, problem.stable_tau(g, margin));
            }
            StepPolicy::Fixed { tau } => v = problem.explicit_update(&v, tau),
        }
        if it % check_every != 0 && it != cfg.max_iters {
            continue;
        }
        last = problem.residual(&v);
        let v0 = v[grid.center()].to_f64();
        if last.0.is_nan() || v0.is_nan() {
            return Err(Error::NonFinite { context: "solver iterate", x: 0.0 });
        }
        trace.push((it, last.0));
        if last.0 < cfg.tol {
            return Ok(IterationResult { v, iterations: it, residual_scaled: last.0, residual_abs: last.1, divergence: None });
        }
        let reason = if math::abs(v0) > cfg.blowup_threshold || !v[grid.center()].is_finite() {
            Some(format!("|v(0)| = {:e} exceeds {:e}", v0, cfg.blowup_threshold))
        } else {
            if last.0 < best {
                best = last.0;
                stalled = 0;
            } else {
                stalled += check_every;
            }
            (stalled >= cfg.divergence_window)
                .then(|| format!("residual has not decreased for {} iterations", stalled))
        };
        if let Some(reason) = reason {
            let report = DivergenceReport { reason, iterations: it, residual_trace: trace, v_at_zero: v0, radius: grid.radius() };
            return Ok(IterationResult { v, iterations: it, residual_scaled: last.0, residual_abs: last.1, divergence: Some(report) });
        }
    }
    Err(Error::NotConverged { iterations: cfg.max_iters, residual: last.0, spectral_radius: None })
}

/// Source values at the nodes, mollified when requested. Band entries are zero.
pub fn source_values(cfg: &SolverConfig, spec: &SourceSpec, grid: &Grid) -> Result<Vec<f64>> {
    match cfg.mollifier_radius {
        Some(r) if r >= 2.0 * grid.h() => mollify(spec, grid, r),
        _ => grid
            .nodes()
            .enumerate()
            .map(|(i, x)| if grid.is_interior(i) { spec.value(x) } else { Ok(0.0) })
            .collect(),
    }
}

/// `rho_r * f` at interior nodes by discrete convolution with a triweight bump of radius `r`.
pub fn mollify(spec: &SourceSpec, grid: &Grid, r: f64) -> Result<Vec<f64>> {
    let h = grid.h();
    let reach = math::floor(r / h) as isize;
    let weights: Vec<f64> = (-reach..=reach)
        .map(|k| {
            let s = k as f64 * h / r;
            let q = 1.0 - s * s;
            if q > 0.0 { q * q * q } else { 0.0 }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut out = alloc::vec![0.0; grid.len()];
    for i in grid.interior() {
        let x = grid.x(i);
        let mut acc = 0.0;
        for (w, k) in weights.iter().zip(-reach..=reach) {
            acc += w * spec.value(x - k as f64 * h)?;
        }
        out[i] = acc / total;
    }
    Ok(out)
}

/// Assembles the nodewise system for `solve_truncated`.
pub fn build_problem(
    cfg: &SolverConfig,
    lambda: f64,
    spec: &SourceSpec,
    theta: Option<&GridFunction>,
    boundary: &Boundary,
) -> Result<TruncatedProblem<f64>> {
    cfg.validate()?;
    if cfg.sigma > 0.0 && lambda != 0.0 {
        return Err(Error::Precondition { reason: format!("discounted solves fix lambda = 0, got {lambda}") });
    }
    if spec.m != cfg.m {
        return Err(Error::InvalidParameter { name: "m", value: spec.m, reason: "source exponent differs from solver exponent" });
    }
    let grid = cfg.grid()?;
    let kernel = cfg.kernel()?;
    let f = source_values(cfg, spec, &grid)?;
    let theta = match theta {
        Some(t) => problem::sample_on(&grid, t)?,
        None => alloc::vec![0.0; grid.len()],
    };
    let mut rhs = alloc::vec![0.0; grid.len()];
    let mut scale = alloc::vec![1.0; grid.len()];
    for i in grid.interior() {
        let data = f[i] + cfg.sigma * theta[i];
        rhs[i] = data - lambda;
        scale[i] = 1.0 + math::abs(data);
    }
    let band = boundary.band_values(&grid)?;
    TruncatedProblem::new(grid, &kernel, cfg.m, cfg.sigma, cfg.epsilon, rhs, scale, band)
}

/// Solves `lambda - eps Lap_h v - L_R^psi[v] + |D_h v|^m + sigma v = f + sigma Theta` on `|x| < R`.
///
/// With `sigma > 0` the caller must pass `lambda = 0`; the ergodic estimate is
/// then `sigma v(0)`. Divergence is returned as data, not as an error.
pub fn solve_truncated(
    cfg: &SolverConfig,
    lambda: f64,
    spec: &SourceSpec,
    theta: Option<&GridFunction>,
    boundary: &Boundary,
    init: Option<&GridFunction>,
) -> Result<SolveOutcome> {
    let problem = build_problem(cfg, lambda, spec, theta, boundary)?;
    let grid = *problem.grid();
    let start = match init {
        Some(u) => problem::sample_on(&grid, u)?,
        None => alloc::vec![0.0; grid.len()],
    };
    let run = iterate(cfg, &problem, &start)?;
    if let Some(report) = run.divergence {
        return Ok(SolveOutcome::Diverged(report));
    }
    Ok(SolveOutcome::Converged(package(cfg, lambda, &problem, run)?))
}

fn package(cfg: &SolverConfig, lambda: f64, problem: &TruncatedProblem<f64>, run: IterationResult<f64>) -> Result<SolveOutput> {
    let grid = *problem.grid();
    let kernel = cfg.kernel()?;
    let c = grid.center();
    let v0 = run.v[c];
    let w: Vec<f64> = run.v.iter().map(|x| x - v0).collect();

    let n = kernel.half_width() as isize;
    let mu: Vec<f64> = (0..grid.len())
        .map(|i| {
            if !grid.is_interior(i) {
                return 0.0;
            }
            let leaked: f64 = (-n..=n)
                .filter(|j| grid.is_band((i as isize - j) as usize))
                .map(|j| kernel.mass_at(j))
                .sum();
            -v0 * leaked
        })
        .collect();

    let forcing: Vec<f64> = (0..grid.len())
        .map(|i| if grid.is_interior(i) { problem.forcing(i) } else { 0.0 })
        .collect();
    let residual = problem.residual_profile(&run.v);
    let gradient = problem.gradient_sup(&run.v);
    let gf = |values: Vec<f64>| GridFunction::new(grid, values).map(|g| g.with_extension(Extension::Linear));
    Ok(SolveOutput {
        config: cfg.clone(),
        lambda,
        v: gf(run.v)?,
        w: gf(w)?,
        v_at_zero: v0,
        iterations: run.iterations,
        final_residual_sup: run.residual_scaled,
        final_residual_abs: run.residual_abs,
        mu_profile: GridFunction::new(grid, mu)?,
        gradient_sup_interior: gradient,
        forcing: GridFunction::new(grid, forcing)?,
        residual: GridFunction::new(grid, residual)?,
    })
}

/// `|D_h v|^m` with the upwind slope `max((v_i - v_{i-1})/h, (v_i - v_{i+1})/h, 0)`.
/// End nodes use their single available neighbor.
pub fn godunov_gradient_power(v: &GridFunction, m: f64) -> GridFunction {
    let h = v.grid().h();
    let vals = v.values();
    let last = vals.len() - 1;
    let out = (0..vals.len())
        .map(|i| {
            let left = if i > 0 { (vals[i] - vals[i - 1]) / h } else { 0.0 };
            let right = if i < last { (vals[i] - vals[i + 1]) / h } else { 0.0 };
            math::powf(left.max(right).max(0.0), m)
        })
        .collect();
    GridFunction::from_parts(*v.grid(), out, Extension::None)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradientBoundReport {
    pub inner_radius: f64,
    /// `sup_{B_R0} |D_h w|`.
    pub x_sup: f64,
    /// Largest one-sided slope within `B_{R0+1}`.
    pub x_extended: f64,
    pub c1: f64,
    pub c2: f64,
    /// Positive root of `X^m = C2 X + C1`.
    pub root: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub skipped: Option<String>,
}

/// Checks `X^m <= C2 X + C1` on `B_R0`, with `C1` from the zero-order terms and
/// `C2 X` bounding the nonlocal term via the kernel's first absolute moment.
pub fn gradient_bound_check(outcome: &SolveOutcome, inner_radius: f64) -> Result<GradientBoundReport> {
    let out = match outcome {
        SolveOutcome::Converged(out) => out,
        SolveOutcome::Diverged(report) => {
            return Ok(GradientBoundReport {
                inner_radius,
                x_sup: f64::NAN,
                x_extended: f64::NAN,
                c1: f64::NAN,
                c2: f64::NAN,
                root: f64::NAN,
                tolerance: 0.0,
                holds: false,
                skipped: Some(format!("solve diverged: {}", report.reason)),
            });
        }
    };
    let grid = *out.v.grid();
    let cfg = &out.config;
    if !(inner_radius > 0.0) || inner_radius > grid.radius() - 1.0 {
        return Err(Error::InvalidParameter { name: "R0", value: inner_radius, reason: "inner radius must lie in (0, R-1]" });
    }
    let kernel = cfg.kernel()?;
    let h = grid.h();
    let v = out.v.values();
    let first_moment: f64 = kernel
        .masses()
        .iter()
        .enumerate()
        .map(|(k, a)| a * math::abs((k as f64 - kernel.half_width() as f64) * h))
        .sum();

    let mut x_sup = 0.0f64;
    let mut x_ext = 0.0f64;
    let mut c1 = 0.0f64;
    for i in grid.interior() {
        let x = math::abs(grid.x(i));
        if x <= inner_radius + 1.0 + 1e-12 {
            x_ext = x_ext.max(math::abs(v[i + 1] - v[i]) / h).max(math::abs(v[i] - v[i - 1]) / h);
        }
        if x <= inner_radius + 1e-12 {
            let g = ((v[i] - v[i - 1]) / h).max((v[i] - v[i + 1]) / h).max(0.0);
            x_sup = x_sup.max(g);
            let lap = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            let zero_order = out.forcing.at(i) - cfg.sigma * v[i] + cfg.epsilon * lap;
            c1 = c1.max(math::abs(zero_order));
        }
    }
    let c2 = if x_sup > 0.0 { first_moment * x_ext / x_sup } else { first_moment };
    let m = cfg.m;
    let g = |x: f64| math::powf(x, m) - c2 * x;
    let floor = math::powf(c2, 1.0 / (m - 1.0));
    let root = math::smallest_root(g, c1, floor, 1e12).unwrap_or(f64::INFINITY);
    let tolerance = 1e-8 * (1.0 + root) + out.final_residual_abs;
    Ok(GradientBoundReport {
        inner_radius,
        x_sup,
        x_extended: x_ext,
        c1,
        c2,
        root,
        tolerance,
        holds: x_sup <= root + tolerance,
        skipped: None,
    })
}

#[cfg(test)]
mod tests;
