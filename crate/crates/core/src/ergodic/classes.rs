use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid_kernel::{Extension, Grid, GridFunction, Kernel};
use crate::math;
use crate::problem::{
    build_psi, check_hypotheses, residual_ep, GradientScheme, GrowthClass, HypothesisScan, Profile, Psi, ScanOptions,
    SourceFamily, SourceSpec,
};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeViolation {
    pub x: f64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MembershipReport {
    pub mu: f64,
    /// `sup u / Psi` over `|x| >= (R+1)/2`.
    pub sup_ratio_outer: f64,
    /// Nodes where `u > mu Psi + u(0)`.
    pub violations: Vec<NodeViolation>,
    pub member: bool,
}

/// Growth-class test `u <= mu Psi + u(0)` at every node, plus the outer-half ratio.
pub fn class_membership<P: Profile>(u: &GridFunction, psi: &P, mu: f64) -> Result<MembershipReport> {
    let grid = u.grid();
    let u0 = u.at_zero();
    let half = 0.5 * (grid.radius() + 1.0);
    let mut sup_ratio = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for (i, x) in grid.nodes().enumerate() {
        let p = psi.value(x);
        if !p.is_finite() {
            return Err(Error::NonFinite { context: "class profile", x });
        }
        if math::abs(x) >= half && p > 0.0 {
            sup_ratio = sup_ratio.max(u.at(i) / p);
        }
        let bound = mu * p + u0;
        if u.at(i) > bound + 1e-10 * (1.0 + math::abs(bound)) {
            violations.push(NodeViolation { x, value: u.at(i), bound });
        }
    }
    Ok(MembershipReport { mu, sup_ratio_outer: sup_ratio, member: violations.is_empty(), violations })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LowerBoundReport {
    pub eta: f64,
    pub onset: f64,
    /// Largest `C` with `u >= C Psi((1-eta)x) - 1/C` beyond the onset, if the trend is bounded.
    pub c_eta: Option<f64>,
    /// Where the admissible constant collapses.
    pub witness: Option<NodeViolation>,
}

/// Fits `C_eta` in `u(x) >= C Psi((1-eta)x) - 1/C` for `|x| >= onset`.
///
/// Per node the admissible set is `(0, C_x]` with `C_x` the positive root of
/// `Psi_eta C^2 - u C - 1`. A failure is reported when `C_x` decreases steadily across the
/// outer half of the scanned range and ends below 3/4 of its midway value, which signals
/// `C_eta -> 0` as `|x| -> inf`.
pub fn certify_lower_bound(u: &GridFunction, spec: &SourceSpec, eta: f64) -> Result<LowerBoundReport> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter { name: "eta", value: eta, reason: "must lie in (0, 1)" });
    }
    let grid = *u.grid();
    let edge = grid.radius() + 1.0;
    let scan = ScanOptions::new(grid.h(), edge.max(32.0))?;
    let (psi, barriers) = build_psi(spec, 0.0, &scan)?;
    let onset = (barriers.r_upper + 1.0).min(0.5 * edge);
    let mut per_node: Vec<(f64, f64)> = Vec::new();
    for (i, x) in grid.nodes().enumerate() {
        if math::abs(x) < onset {
            continue;
        }
        let p = psi.value((1.0 - eta) * x);
        let v = u.at(i);
        let c = if p > 0.0 { (v + math::sqrt(v * v + 4.0 * p)) / (2.0 * p) } else { f64::INFINITY };
        per_node.push((x, c));
    }
    let Some(&(x_min, c_min)) = per_node.iter().min_by(|a, b| a.1.total_cmp(&b.1)) else {
        return Err(Error::Precondition { reason: "no nodes beyond the onset radius".into() });
    };
    // Compare the admissible constant at the outer edge with its value midway out.
    let outer = per_node.iter().filter(|(x, _)| math::abs(*x) >= edge - grid.h() * 0.5).map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mid_r = 0.5 * (onset + edge);
    let mid = per_node
        .iter()
        .filter(|(x, _)| math::abs(math::abs(*x) - mid_r) <= 0.5 * grid.h() + 1e-12)
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min);
    let mut tail: Vec<(f64, f64)> = per_node.iter().filter(|(x, _)| *x >= mid_r - 1e-12).copied().collect();
    tail.sort_by(|a, b| a.0.total_cmp(&b.0));
    let decreasing = tail.windows(2).all(|w| w[1].1 <= w[0].1);
    let collapsing = mid.is_finite() && decreasing && outer < 0.75 * mid;
    if collapsing {
        let witness_x = per_node.iter().filter(|(x, _)| math::abs(*x) >= edge - 0.5 * grid.h()).map(|p| p.0).next().unwrap_or(x_min);
        let i = grid.index_of(witness_x).unwrap_or(grid.len() - 1);
        let p = psi.value((1.0 - eta) * witness_x);
        let bound = mid * p - 1.0 / mid;
        return Ok(LowerBoundReport { eta, onset, c_eta: None, witness: Some(NodeViolation { x: witness_x, value: u.at(i), bound }) });
    }
    Ok(LowerBoundReport { eta, onset, c_eta: Some(c_min), witness: None })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Transform {
    /// `a u(a x)` (the `a^N` factor with `N = 1`).
    Scale { a: f64 },
    /// `(u + s)^q` with `s` making the base nonnegative.
    Power { q: f64 },
}

#[derive(Clone, Debug)]
pub struct TransformReport {
    pub transform: Transform,
    pub growth: Option<GrowthClass>,
    /// Residual of the transformed function at valid nodes.
    pub residual: GridFunction,
    /// `|x|` up to which the transformed stencil stays inside stored data.
    pub valid_radius: f64,
    /// Smallest lattice radius beyond which the residual is nonnegative up to `valid_radius`.
    pub r1: Option<f64>,
    pub min_residual_beyond_r1: Option<f64>,
    /// `sup_x sup_{B_1(x)} Psi / Psi(x)` for `|x| >= 1`, in the slow case.
    pub slow_constant: Option<f64>,
}

impl TransformReport {
    pub fn nonnegative_beyond_r1(&self) -> bool {
        self.r1.is_some()
    }
}

fn transform_values(u: &GridFunction, t: Transform) -> Result<(GridFunction, f64)> {
    let grid = *u.grid();
    let stored = grid.radius() + 1.0;
    match t {
        Transform::Power { q } => {
            if !(q >= 1.0) {
                return Err(Error::InvalidParameter { name: "q", value: q, reason: "power must be at least 1" });
            }
            let shift = math::neg_part(u.values().iter().copied().fold(f64::INFINITY, f64::min));
            let g = u.map(|_, v| math::powf(v + shift, q))?.with_extension(Extension::Linear);
            Ok((g, grid.radius()))
        }
        Transform::Scale { a } => {
            if !(a >= 1.0) {
                return Err(Error::InvalidParameter { name: "a", value: a, reason: "scale must be at least 1" });
            }
            let valid = stored / a - 1.0;
            if valid <= 0.0 {
                return Err(Error::TransformDomain { x: grid.h(), needed: a * (grid.h() + 1.0), available: stored });
            }
            let values: Vec<f64> = grid
                .nodes()
                .map(|x| if math::abs(a * x) <= stored { u.eval(a * x).map(|v| a * v) } else { Ok(0.0) })
                .collect::<Result<_>>()?;
            Ok((GridFunction::new(grid, values)?.with_extension(Extension::Linear), valid))
        }
    }
}

/// Residual of the transformed profile; entries beyond the valid radius are zero.
pub fn transformed_residual(
    u: &GridFunction,
    spec: &SourceSpec,
    lambda: f64,
    t: Transform,
    k: &Kernel,
) -> Result<(GridFunction, f64)> {
    let (g, valid) = transform_values(u, t)?;
    let grid = *g.grid();
    let rep = residual_ep(lambda, &g, spec, k, GradientScheme::Godunov)?;
    let masked: Vec<f64> = (0..grid.len())
        .map(|i| if math::abs(grid.x(i)) <= valid + 1e-12 { rep.residual.at(i) } else { 0.0 })
        .collect();
    Ok((GridFunction::new(grid, masked)?, valid))
}

fn slow_constant(psi: &Psi, grid: &Grid, reach: f64) -> f64 {
    let mut worst = 1.0f64;
    let cells = grid.cells_per_unit() as isize;
    for x in grid.nodes().filter(|x| math::abs(*x) >= 1.0 && math::abs(*x) <= reach) {
        let base = psi.value(x);
        for j in -cells..=cells {
            let y = x + j as f64 * grid.h();
            worst = worst.max(psi.value(y) / base);
        }
    }
    worst
}

/// Exercises the uniqueness transforms: `(u+s)^q` in the slow case, `a u(ax)` in the fast case.
pub fn transform_supersolution_checks(
    u: &GridFunction,
    spec: &SourceSpec,
    lambda: f64,
    a: f64,
    q: f64,
    k: &Kernel,
) -> Result<TransformReport> {
    let growth = match spec.family {
        SourceFamily::Power { .. } | SourceFamily::Constant { .. } => Some(GrowthClass::Slow),
        SourceFamily::ExpLinear { .. } | SourceFamily::DoubleExp { .. } => Some(GrowthClass::Fast),
        SourceFamily::Tabulated { .. } => check_hypotheses(spec, &HypothesisScan::default()).growth,
    };
    let transform = match growth {
        Some(GrowthClass::Fast) => Transform::Scale { a },
        _ => Transform::Power { q },
    };
    let (residual, valid) = transformed_residual(u, spec, lambda, transform, k)?;
    let grid = *u.grid();
    let tol = |x: f64| 1e-8 * (1.0 + math::abs(lambda) + spec.value(x).map(math::abs).unwrap_or(0.0));

    // Walk inward from the valid edge while the residual stays nonnegative.
    let mut nodes: Vec<(f64, f64)> =
        (0..grid.len()).map(|i| (math::abs(grid.x(i)), residual.at(i))).filter(|(r, _)| *r <= valid + 1e-12).collect();
    nodes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut r1 = None;
    let mut min_beyond = f64::INFINITY;
    let mut idx = 0;
    while idx < nodes.len() {
        let r = nodes[idx].0;
        let mut ok = true;
        let mut local_min = f64::INFINITY;
        while idx < nodes.len() && nodes[idx].0 == r {
            local_min = local_min.min(nodes[idx].1);
            ok &= nodes[idx].1 >= -tol(r);
            idx += 1;
        }
        if !ok {
            break;
        }
        r1 = Some(r);
        min_beyond = min_beyond.min(local_min);
    }
    let slow = match (growth, spec.family.clone()) {
        (Some(GrowthClass::Slow), SourceFamily::Power { .. }) => {
            let scan = ScanOptions::new(grid.h(), 32.0f64.max(grid.radius() + 2.0))?;
            let (psi, _) = build_psi(spec, 0.0, &scan)?;
            Some(slow_constant(&psi, &grid, grid.radius()))
        }
        _ => None,
    };
    Ok(TransformReport {
        transform,
        growth,
        residual,
        valid_radius: valid,
        r1,
        min_residual_beyond_r1: r1.map(|_| min_beyond),
        slow_constant: slow,
    })
}
