use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::problem::SourceSpec;
use crate::real::{Real, Wide};
use crate::solver::{iterate, DivergenceReport, SolverConfig, TruncatedProblem};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlopeReport {
    /// `(u(0,T) - u(0,T/2)) / (T/2)`.
    pub slope: f64,
    /// Same estimator on `[T/4, T/2]`.
    pub slope_half: f64,
    /// `|slope - slope_half|` plus a solver floor.
    pub error: f64,
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
    pub u_at_zero: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SlopeOutcome {
    Converged(SlopeReport),
    Diverged(DivergenceReport),
}

/// Implicit Euler for `u_t = L[u] - |Du|^m + f`, `u(.,0) = 0`, with band values growing as `t f`.
///
/// Falls back to extended-range arithmetic when `f` overflows `f64` on the grid.
pub fn time_marching_slope(spec: &SourceSpec, cfg: &SolverConfig, horizon: f64, dt: f64) -> Result<SlopeOutcome> {
    spec.validate()?;
    if !(dt > 0.0) || !(horizon >= 4.0 * dt) {
        return Err(Error::InvalidParameter { name: "dt", value: dt, reason: "need dt > 0 and horizon >= 4 dt" });
    }
    let steps = math::round(horizon / dt) as usize;
    let step_cfg = SolverConfig { sigma: 1.0 / dt, ..cfg.clone() };
    step_cfg.validate()?;
    let grid = step_cfg.grid()?;
    let overflow = grid.nodes().any(|x| !matches!(spec.value(x), Ok(v) if v.is_finite()));
    if overflow {
        march::<Wide>(spec, &step_cfg, steps, dt)
    } else {
        march::<f64>(spec, &step_cfg, steps, dt)
    }
}

fn march<T: Real>(spec: &SourceSpec, cfg: &SolverConfig, steps: usize, dt: f64) -> Result<SlopeOutcome> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel()?;
    let f: Vec<T> = grid.nodes().map(|x| spec.value_real::<T>(x)).collect::<Result<_>>()?;
    let inv_dt = T::from_f64(1.0 / dt);
    let mut u: Vec<T> = alloc::vec![T::zero(); grid.len()];
    let rhs_of = |u: &[T]| -> (Vec<T>, Vec<T>) {
        let rhs: Vec<T> = f.iter().zip(u).map(|(fi, ui)| *fi + *ui * inv_dt).collect();
        let scale = rhs.iter().map(|r| T::from_f64(1.0) + r.abs()).collect();
        (rhs, scale)
    };
    let band_at = |t: f64| -> Vec<T> { f.iter().map(|fi| *fi * T::from_f64(t)).collect() };
    let (rhs, scale) = rhs_of(&u);
    let mut problem = TruncatedProblem::new(grid, &kernel, cfg.m, cfg.sigma, cfg.epsilon, rhs, scale, band_at(dt))?;
    let c = grid.center();
    let mut history = Vec::with_capacity(steps);
    for s in 1..=steps {
        if s > 1 {
            let (rhs, scale) = rhs_of(&u);
            problem.replace_rhs(rhs, scale);
            problem.replace_band(band_at(s as f64 * dt));
        }
        let run = iterate(cfg, &problem, &u)?;
        if let Some(mut report) = run.divergence {
            report.reason = alloc::format!("blow-up at t = {}: {}", s as f64 * dt, report.reason);
            return Ok(SlopeOutcome::Diverged(report));
        }
        u = run.v;
        history.push(u[c].to_f64());
    }
    let at = |t_steps: usize| history[t_steps - 1];
    let slope_over = |end: usize| (at(end) - at(end / 2)) / ((end - end / 2) as f64 * dt);
    let slope = slope_over(steps);
    let slope_half = slope_over(steps / 2);
    let error = math::abs(slope - slope_half) + 10.0 * cfg.tol * (1.0 + math::abs(slope));
    Ok(SlopeOutcome::Converged(SlopeReport {
        slope,
        slope_half,
        error,
        horizon: steps as f64 * dt,
        dt,
        steps,
        u_at_zero: at(steps),
    }))
}
