use alloc::vec::Vec;

use super::{problem::sample_on, SolverConfig};
use crate::error::{Error, Result};
use crate::grid_kernel::GridFunction;
use crate::math;

#[derive(Clone, Debug)]
pub struct LinearAuxOutput {
    pub rho: GridFunction,
    pub iterations: usize,
    /// `(R+1)^2 / (2 eps + M_2)` with the discrete second moment `M_2`.
    pub c_bound: f64,
    pub sup_boundary: f64,
    pub sup_source: f64,
    pub sup_rho: f64,
    /// `sup|rho| <= sup_boundary + C sup|F|`.
    pub bound_holds: bool,
    /// Geometric-mean contraction of the last updates.
    pub spectral_radius: f64,
}

const DAMPING: f64 = 0.9;

/// Solves `-eps Lap_h rho - L_R[rho] = F` on the interior with `rho = g` on the band,
/// by damped Jacobi on the M-matrix `(I - K_h + eps A_h)`.
pub fn solve_linear_aux(cfg: &SolverConfig, source: &GridFunction, g: f64) -> Result<LinearAuxOutput> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let kernel = cfg.kernel()?;
    let f = sample_on(&grid, source)?;
    let h = grid.h();
    let n = kernel.half_width();
    let masses = kernel.masses();
    let visc = cfg.epsilon / (h * h);
    let diag = 1.0 - masses[n] + 2.0 * visc;

    let sup_source = grid.interior().map(|i| math::abs(f[i])).fold(0.0, f64::max);
    let mut rho: Vec<f64> = (0..grid.len()).map(|i| if grid.is_band(i) { g } else { 0.0 }).collect();
    let mut next = rho.clone();
    let stop = cfg.tol * (1.0 + sup_source);
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mut change = 0.0f64;
        for i in grid.interior() {
            let window = &rho[i - n..=i + n];
            let off: f64 = masses.iter().zip(window).enumerate().filter(|(q, _)| *q != n).map(|(_, (a, x))| a * x).sum();
            let jacobi = (f[i] + off + visc * (rho[i - 1] + rho[i + 1])) / diag;
            next[i] = (1.0 - DAMPING) * rho[i] + DAMPING * jacobi;
            change = change.max(math::abs(next[i] - rho[i]));
        }
        core::mem::swap(&mut rho, &mut next);
        history.push(change);
        if change.is_nan() {
            return Err(Error::NonFinite { context: "linear auxiliary solve", x: 0.0 });
        }
        // Update size times 1/(1 - rate) bounds the remaining error.
        let rate = contraction(&history);
        if change <= stop * (1.0 - rate.min(0.999_999)) {
            converged = true;
            break;
        }
    }
    let spectral_radius = contraction(&history);
    if !converged {
        return Err(Error::NotConverged { iterations, residual: history.last().copied().unwrap_or(f64::NAN), spectral_radius: Some(spectral_radius) });
    }
    let c_bound = math::powf(grid.radius() + 1.0, 2.0) / (2.0 * cfg.epsilon + kernel.second_moment());
    let sup_rho = rho.iter().map(|x| math::abs(*x)).fold(0.0, f64::max);
    let sup_boundary = math::abs(g);
    let bound_holds = sup_rho <= sup_boundary + c_bound * sup_source + 1e-9 * (1.0 + sup_rho);
    Ok(LinearAuxOutput {
        rho: GridFunction::new(grid, rho)?,
        iterations,
        c_bound,
        sup_boundary,
        sup_source,
        sup_rho,
        bound_holds,
        spectral_radius,
    })
}

fn contraction(history: &[f64]) -> f64 {
    let k = history.len().min(50);
    if k < 2 {
        return 0.0;
    }
    let (a, b) = (history[history.len() - k], history[history.len() - 1]);
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    math::powf(b / a, 1.0 / (k - 1) as f64)
}
