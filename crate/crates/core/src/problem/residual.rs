use alloc::vec::Vec;

use super::source::SourceSpec;
use crate::error::Result;
use crate::grid_kernel::{apply_at, GridFunction, Kernel};
use crate::math;

/// Discretization of `|Du|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GradientScheme {
    /// `|u_{i+1} - u_{i-1}| / 2h`.
    Centered,
    /// `max((u_i - u_{i-1})/h, (u_i - u_{i+1})/h, 0)`.
    Godunov,
}

/// Upwind slope magnitude at node `i` from its two neighbors.
#[inline]
pub fn godunov_slope(left: f64, here: f64, right: f64, h: f64) -> f64 {
    ((here - left) / h).max((here - right) / h).max(0.0)
}

#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub residual: GridFunction,
    pub max: f64,
    pub min: f64,
    /// Nodes with residual `> 0` (subsolution violations).
    pub positive_count: usize,
    /// Nodes with residual `< 0` (supersolution violations).
    pub negative_count: usize,
}

impl ResidualReport {
    /// `(max, min)` over the nodes accepted by `keep(x)`.
    pub fn extremes_where(&self, keep: impl Fn(f64) -> bool) -> (f64, f64) {
        let g = self.residual.grid();
        (0..g.len())
            .filter(|&i| keep(g.x(i)))
            .map(|i| self.residual.at(i))
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), r| (hi.max(r), lo.min(r)))
    }
}

/// Pointwise `lambda - L[u] + |D_h u|^m - f` at every node; `u` must carry an extension rule.
pub fn residual_ep(
    lambda: f64,
    u: &GridFunction,
    spec: &SourceSpec,
    k: &Kernel,
    scheme: GradientScheme,
) -> Result<ResidualReport> {
    let g = *u.grid();
    let h = g.h();
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let idx = i as isize;
        let (left, here, right) = (u.at_index(idx - 1)?, u.at(i), u.at_index(idx + 1)?);
        let slope = match scheme {
            GradientScheme::Centered => math::abs(right - left) / (2.0 * h),
            GradientScheme::Godunov => godunov_slope(left, here, right, h),
        };
        let lu = apply_at(k, u, i)?;
        out.push(lambda - lu + math::powf(slope, spec.m) - spec.value(g.x(i))?);
    }
    let residual = GridFunction::new(g, out)?;
    let v = residual.values();
    Ok(ResidualReport {
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        positive_count: v.iter().filter(|&&r| r > 0.0).count(),
        negative_count: v.iter().filter(|&&r| r < 0.0).count(),
        residual,
    })
}
