//! Solvability versus divergence across growth rates of the source.
//!
//! Verdicts here are numerical evidence, not proofs: the non-existence result they mirror
//! is restricted to radial solutions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid_kernel::GridFunction;
use crate::math;
use crate::problem::{build_phi, SourceFamily, SourceSpec};
use crate::real::{Real, Wide};
use crate::solver::{iterate, SolverConfig, TruncatedProblem};

/// Default `eps` of the analytic witness; the delta search steps by the same amount.
pub const DELTA_RESOLUTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlowupWitness {
    pub a: f64,
    pub m: f64,
    pub eps: f64,
    pub delta: f64,
    /// `a^delta / m`.
    pub gamma: f64,
    pub applies: bool,
}

/// Maximizes `gamma = a^delta / m` over `delta` on `[eps, 1 - eps]` with step `DELTA_RESOLUTION`.
pub fn analytic_blowup_witness(a: f64, m: f64, eps: f64) -> Result<BlowupWitness> {
    if !(a > 1.0) {
        return Err(Error::InvalidParameter { name: "a", value: a, reason: "growth base must exceed 1" });
    }
    if !(m > 1.0) {
        return Err(Error::InvalidParameter { name: "m", value: m, reason: "exponent must exceed 1" });
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter { name: "eps", value: eps, reason: "must lie in (0, 1/2)" });
    }
    let steps = math::floor((1.0 - 2.0 * eps) / DELTA_RESOLUTION + 1e-9) as usize;
    let (mut delta, mut gamma) = (eps, f64::NEG_INFINITY);
    for k in 0..=steps {
        let d = (eps + k as f64 * DELTA_RESOLUTION).min(1.0 - eps);
        let g = math::powf(a, d) / m;
        if g > gamma {
            delta = d;
            gamma = g;
        }
    }
    Ok(BlowupWitness { a, m, eps, delta, gamma, applies: gamma > 1.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Classification {
    SolvableRegime,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceEntry {
    pub radius: f64,
    /// `sup_{|x| <= 2} |w_R|`, saturating to infinity beyond `f64`.
    pub sup_w: f64,
    pub log10_sup_w: f64,
    /// `log10 |sigma v(0)|`.
    pub log10_lambda_sigma: f64,
    pub iterations: usize,
    pub residual: f64,
    /// The inner solve itself reported divergence.
    pub solver_diverged: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanThresholds {
    /// Consecutive trace ratio above which growth counts as divergent.
    pub growth_factor: f64,
    /// Relative change between the last two radii below which the trace is stable.
    pub stable_change: f64,
    /// `eps` of the analytic witness.
    pub witness_eps: f64,
    /// Observation ball radius.
    pub window: f64,
    /// Multiplier `c` of the formal outer profile `2c|x| f^{1/m} + K/sigma`.
    pub outer_c: f64,
    pub outer_k: f64,
}

impl Default for ScanThresholds {
    fn default() -> Self {
        ScanThresholds { growth_factor: 5.0, stable_change: 0.01, witness_eps: DELTA_RESOLUTION, window: 2.0, outer_c: 2.0, outer_k: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegimeVerdict {
    pub classification: Classification,
    /// Verdict from the trace alone.
    pub numeric: Classification,
    /// Present for the double-exponential family.
    pub analytic: Option<BlowupWitness>,
    pub trace: Vec<TraceEntry>,
    pub sigma: f64,
    pub thresholds: ScanThresholds,
    pub note: String,
}

/// Runs truncated discounted solves at each radius in extended-range arithmetic and
/// watches `sup_{B_2} |w_R|`.
pub fn divergence_scan(
    spec: &SourceSpec,
    radii: &[f64],
    sigma: f64,
    cfg: &SolverConfig,
    thresholds: &ScanThresholds,
) -> Result<RegimeVerdict> {
    spec.validate()?;
    if radii.len() < 3 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition { reason: "need at least three increasing radii".into() });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter { name: "sigma", value: sigma, reason: "discount must be positive" });
    }
    let analytic = match spec.family {
        SourceFamily::DoubleExp { p, .. } => Some(analytic_blowup_witness(p, spec.m, thresholds.witness_eps)?),
        _ => None,
    };
    let trace = radii
        .iter()
        .map(|&r| scan_radius(spec, r, sigma, cfg, thresholds))
        .collect::<Result<Vec<_>>>()?;

    let numeric = classify_trace(&trace, thresholds);
    let witness = analytic.is_some_and(|w| w.applies);
    let classification = if witness || numeric == Classification::Divergent {
        Classification::Divergent
    } else if numeric == Classification::SolvableRegime {
        Classification::SolvableRegime
    } else {
        Classification::Inconclusive
    };
    let note = format!(
        "numerical evidence only; trace verdict {:?}{}",
        numeric,
        if witness { ", analytic witness gamma > 1" } else { "" }
    );
    Ok(RegimeVerdict { classification, numeric, analytic, trace, sigma, thresholds: thresholds.clone(), note })
}

fn classify_trace(trace: &[TraceEntry], t: &ScanThresholds) -> Classification {
    let logs: Vec<f64> = trace.iter().map(|e| if e.solver_diverged { f64::INFINITY } else { e.log10_sup_w }).collect();
    let log_factor = math::ln(t.growth_factor) / core::f64::consts::LN_10;
    if logs.windows(2).all(|w| w[1] - w[0] > log_factor) {
        return Classification::Divergent;
    }
    let n = trace.len();
    let (a, b) = (trace[n - 2].sup_w, trace[n - 1].sup_w);
    if a.is_finite() && b.is_finite() && math::abs(b - a) <= t.stable_change * a.max(b).max(1e-300) {
        Classification::SolvableRegime
    } else {
        Classification::Inconclusive
    }
}

fn scan_radius(spec: &SourceSpec, radius: f64, sigma: f64, cfg: &SolverConfig, t: &ScanThresholds) -> Result<TraceEntry> {
    // Sweeps from a subsolution increase monotonically to the fixed-R solution, so stalls are not divergence.
    let local = SolverConfig { sigma, radius, blowup_threshold: f64::INFINITY, divergence_window: usize::MAX, ..cfg.clone() };
    local.validate()?;
    let grid = local.grid()?;
    let kernel = local.kernel()?;
    let phi = build_phi(spec);
    let s = Wide::from_f64(sigma);
    let mut rhs = Vec::with_capacity(grid.len());
    let mut scale = Vec::with_capacity(grid.len());
    let mut band = Vec::with_capacity(grid.len());
    let mut init = Vec::with_capacity(grid.len());
    for x in grid.nodes() {
        let theta = Wide::from_f64(math::abs(x));
        let f: Wide = spec.value_real(x)?;
        let data = f + s * theta;
        rhs.push(data);
        let outer: Wide = phi.value_real(x)?;
        band.push(Wide::from_f64(2.0 * t.outer_c) * outer + Wide::from_f64(t.outer_k / sigma));
        init.push(theta - Wide::from_f64(1.0 / sigma));
    }
    for data in &rhs {
        scale.push(Wide::from_f64(1.0) + data.abs());
    }
    // Neighbor values dwarf the local data here, so residuals are taken relative to the equation's terms.
    let problem = TruncatedProblem::new(grid, &kernel, local.m, sigma, local.epsilon, rhs, scale, band)?.relative_to_terms();
    let run = iterate(&local, &problem, &init)?;
    let c = grid.center();
    let v0 = run.v[c];
    let mut sup = Wide::zero();
    for (i, x) in grid.nodes().enumerate() {
        if math::abs(x) <= t.window + 1e-12 {
            sup = sup.max((run.v[i] - v0).abs());
        }
    }
    let lam = s * v0;
    Ok(TraceEntry {
        radius,
        sup_w: sup.to_f64(),
        log10_sup_w: sup.log10_abs(),
        log10_lambda_sigma: lam.log10_abs(),
        iterations: run.iterations,
        residual: run.residual_scaled,
        solver_diverged: run.divergence.is_some(),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CeilingReport {
    pub a: f64,
    /// `inf ln(u / exp(a^{|x|-1}))` over the outer half-grid.
    pub ln_max_c: f64,
    /// `exp(ln_max_c)`, possibly zero after underflow.
    pub max_admissible_c: f64,
    /// `ln(u / exp(a^{|x|-1}))` at the edge minus its value midway through the outer half.
    pub tail_drop: f64,
    /// `u` dominates `c exp(a^{|x|-1})` with `c` at least machine epsilon and no collapse of the ratio.
    pub dominates: bool,
    /// Outer-half node where the ratio is smallest.
    pub x_min: f64,
}

/// Checks that `u` does not dominate `c exp(a^{|x|-1})` on `|x| >= (R+1)/2` for any
/// `c >= f64::EPSILON`.
///
/// A finite grid cannot see `c -> 0` directly, so a log-ratio falling by more than one unit
/// from the middle of the outer half to the edge also counts as non-domination.
pub fn growth_ceiling_check(u: &GridFunction, m: f64, a: f64) -> Result<CeilingReport> {
    if !(a > m) {
        return Err(Error::InvalidParameter { name: "a", value: a, reason: "ceiling base must exceed m" });
    }
    let grid = u.grid();
    let half = 0.5 * (grid.radius() + 1.0);
    let edge = grid.radius() + 1.0;
    let mid = 0.5 * (half + edge);
    let ln_ratio = |i: usize, x: f64| {
        let v = u.at(i);
        if v > 0.0 { math::ln(v) - math::powf(a, math::abs(x) - 1.0) } else { f64::NEG_INFINITY }
    };
    let mut ln_c = f64::INFINITY;
    let mut x_min = f64::NAN;
    let (mut at_mid, mut at_edge) = (f64::INFINITY, f64::INFINITY);
    for (i, x) in grid.nodes().enumerate() {
        let r = math::abs(x);
        if r < half {
            continue;
        }
        let ratio = ln_ratio(i, x);
        if ratio < ln_c {
            ln_c = ratio;
            x_min = x;
        }
        if math::abs(r - mid) <= 0.5 * grid.h() + 1e-12 {
            at_mid = at_mid.min(ratio);
        }
        if r >= edge - 0.5 * grid.h() {
            at_edge = at_edge.min(ratio);
        }
    }
    let tail_drop = if at_edge == at_mid { 0.0 } else { at_edge - at_mid };
    Ok(CeilingReport {
        a,
        ln_max_c: ln_c,
        max_admissible_c: math::exp(ln_c),
        tail_drop,
        dominates: ln_c >= math::ln(f64::EPSILON) && tail_drop >= -1.0,
        x_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_kernel::Grid;
    use crate::problem::{build_psi, Profile, ScanOptions};

    #[test]
    fn witness_examples() {
        let w = analytic_blowup_witness(4.0, 3.0, 0.05).unwrap();
        assert!((w.delta - 0.95).abs() < 1e-12 && w.applies);
        assert!((w.gamma - 4f64.powf(0.95) / 3.0).abs() < 1e-12);
        assert!(!analytic_blowup_witness(2.0, 3.0, 0.01).unwrap().applies);
        assert!(!analytic_blowup_witness(3.0, 3.0, 1e-3).unwrap().applies);
        assert!(analytic_blowup_witness(0.5, 3.0, 0.1).is_err());
    }

    #[test]
    fn witness_is_monotone_in_a() {
        let mut seen = false;
        for k in 0..200 {
            let a = 1.5 + 0.05 * k as f64;
            let applies = analytic_blowup_witness(a, 3.0, 1e-3).unwrap().applies;
            assert!(!seen || applies);
            seen |= applies;
            assert_eq!(applies, a.powf(1.0 - 1e-3) > 3.0);
        }
    }

    fn fast() -> SolverConfig {
        SolverConfig { h: 0.05, tol: 1e-8, ..SolverConfig::default() }
    }

    #[test]
    fn constant_source_is_stable() {
        let spec = SourceSpec::constant(1.0, 3.0).unwrap();
        let v = divergence_scan(&spec, &[4.0, 6.0, 8.0], 0.05, &fast(), &ScanThresholds::default()).unwrap();
        assert_ne!(v.classification, Classification::Divergent);
        assert!(v.analytic.is_none());
    }

    #[test]
    fn sub_and_super_threshold_scans() {
        let sub = SourceSpec::double_exp(1.0, 1.8, 3.0).unwrap();
        let v = divergence_scan(&sub, &[4.0, 6.0, 8.0], 0.05, &fast(), &ScanThresholds::default()).unwrap();
        assert_eq!(v.classification, Classification::SolvableRegime, "{v:?}");
        let sup = SourceSpec::double_exp(1.0, 4.5, 3.0).unwrap();
        let v = divergence_scan(&sup, &[4.0, 6.0, 8.0], 0.05, &fast(), &ScanThresholds::default()).unwrap();
        assert_eq!(v.classification, Classification::Divergent, "{v:?}");
        assert_eq!(v.numeric, Classification::Divergent, "{v:?}");
    }

    #[test]
    fn scan_needs_three_radii() {
        let spec = SourceSpec::constant(1.0, 3.0).unwrap();
        assert!(divergence_scan(&spec, &[4.0, 6.0], 0.05, &fast(), &ScanThresholds::default()).is_err());
    }

    #[test]
    fn ceiling_examples() {
        let grid = Grid::new(8.0, 0.05).unwrap();
        let poly = GridFunction::new(grid, grid.nodes().map(|x| 1.0 + x * x).collect()).unwrap();
        let r = growth_ceiling_check(&poly, 3.0, 4.5).unwrap();
        assert!(!r.dominates && r.max_admissible_c < 1e-300);

        let small = Grid::new(3.0, 0.05).unwrap();
        let synthetic = GridFunction::new(small, small.nodes().map(|x| 4.5f64.powf(x.abs() - 1.0).exp()).collect()).unwrap();
        let r = growth_ceiling_check(&synthetic, 3.0, 4.5).unwrap();
        assert!(r.dominates);
        assert!((r.ln_max_c).abs() < 1e-9);

        let spec = SourceSpec::double_exp(1.0, 3.0, 3.0).unwrap();
        let scan = ScanOptions::new(0.05, 12.0).unwrap();
        let (psi, _) = build_psi(&spec, 0.0, &scan).unwrap();
        let g4 = Grid::new(4.0, 0.05).unwrap();
        let u = psi.sample(g4).unwrap();
        for a in [3.3, 4.5, 6.0] {
            assert!(!growth_ceiling_check(&u, 3.0, a).unwrap().dominates);
        }
    }
}
