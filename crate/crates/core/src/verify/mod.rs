//! Discrete comparison and strong maximum principle checks.
//!
//! Both checks work at scheme accuracy: inequalities hold up to `C * tol`, where
//! `C = 1 + sup c + 2` bounds the discrete linearized operator and is stated in each report.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::grid_kernel::{apply_at, GridFunction, Kernel};
use crate::math;
use crate::problem::godunov_slope;

/// Where the extreme of a check was found.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Location {
    Interior,
    Boundary,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonReport {
    /// `sub <= super + tolerance_used` at every interior node.
    pub ordered: bool,
    /// Largest `sub - super` over all nodes.
    pub worst_violation: f64,
    pub worst_node: usize,
    pub worst_x: f64,
    pub location: Location,
    /// `C * tol`.
    pub tolerance_used: f64,
    pub constant: f64,
}

/// `C = 1 + sup c + 2` for the linearization coefficient `c = m |D_h u|^{m-1}` of `u`.
pub fn linearization_constant(u: &GridFunction, m: f64) -> f64 {
    let g = u.grid();
    let v = u.values();
    let h = g.h();
    let sup_c = g
        .interior()
        .map(|i| {
            let slope = math::abs(v[i] - v[i - 1]).max(math::abs(v[i + 1] - v[i])) / h;
            m * math::powf(slope, m - 1.0)
        })
        .fold(0.0, f64::max);
    3.0 + sup_c
}

/// Checks `sub <= super` on the interior given residual certificates for both.
///
/// `residual_sub` must be `<= tol` and `residual_super >= -tol` at interior nodes, and
/// `band_ordering` asserts `sub <= super` on the outer band, which is also verified from the data.
/// A missing or failing certificate is a [`Error::Precondition`].
pub fn comparison_check(
    sub: &GridFunction,
    sup: &GridFunction,
    residual_sub: Option<&GridFunction>,
    residual_super: Option<&GridFunction>,
    band_ordering: bool,
    m: f64,
    tol: f64,
) -> Result<ComparisonReport> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter { name: "tol", value: tol, reason: "must be finite and >= 0" });
    }
    let g = *sub.grid();
    if *sup.grid() != g {
        return Err(Error::GridMismatch);
    }
    let (Some(rs), Some(rp)) = (residual_sub, residual_super) else {
        return Err(Error::Precondition { reason: "both residual certificates are required".into() });
    };
    if *rs.grid() != g || *rp.grid() != g {
        return Err(Error::GridMismatch);
    }
    if !band_ordering {
        return Err(Error::Precondition { reason: "band ordering sub <= super was not asserted".into() });
    }
    for i in 0..g.len() {
        if g.is_band(i) && sub.at(i) > sup.at(i) + tol {
            return Err(Error::Precondition {
                reason: format!("sub exceeds super on the band at x = {} by {:e}", g.x(i), sub.at(i) - sup.at(i)),
            });
        }
    }
    for i in g.interior() {
        if rs.at(i) > tol {
            return Err(Error::Precondition {
                reason: format!("subsolution residual {:e} > tol at x = {}", rs.at(i), g.x(i)),
            });
        }
        if rp.at(i) < -tol {
            return Err(Error::Precondition {
                reason: format!("supersolution residual {:e} < -tol at x = {}", rp.at(i), g.x(i)),
            });
        }
    }

    let constant = linearization_constant(sub, m);
    let tolerance_used = constant * tol;
    let (mut worst, mut node) = (f64::NEG_INFINITY, g.center());
    for i in 0..g.len() {
        let d = sub.at(i) - sup.at(i);
        if d > worst {
            worst = d;
            node = i;
        }
    }
    let interior_worst = g.interior().map(|i| sub.at(i) - sup.at(i)).fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparisonReport {
        ordered: interior_worst <= tolerance_used,
        worst_violation: worst,
        worst_node: node,
        worst_x: g.x(node),
        location: if g.is_band(node) { Location::Boundary } else { Location::Interior },
        tolerance_used,
        constant,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropagationReport {
    /// False when the maximum over the grid is attained only on the band.
    pub interior_max: bool,
    pub max_value: f64,
    /// Interior node where the max is attained.
    pub x0: Option<f64>,
    /// Largest `r` such that every interior node with `|x - x0| <= r` carries the max;
    /// the farthest interior distance when all of them do.
    pub propagation_radius: f64,
    /// Every interior node carries the max.
    pub full_grid: bool,
    pub reached: usize,
    /// Largest `max - w` over positive-weight neighbors of reached interior nodes.
    pub defect: f64,
    pub tolerance_used: f64,
    pub constant: f64,
}

/// Spreads an interior maximum of `w` through positive kernel weights.
///
/// Requires `-L[w] + c |D_h w| <= tol` at interior nodes (`c = 0` when absent), otherwise
/// returns [`Error::Precondition`]. Nodes within `C * tol` of the max count as attaining it.
pub fn strong_max_propagation(
    w: &GridFunction,
    k: &Kernel,
    c: Option<&GridFunction>,
    tol: f64,
) -> Result<PropagationReport> {
    let g = *w.grid();
    if k.half_width() != g.cells_per_unit() {
        return Err(Error::SpacingMismatch { grid_h: g.h(), kernel_h: k.h() });
    }
    if let Some(c) = c {
        if *c.grid() != g {
            return Err(Error::GridMismatch);
        }
    }
    let v = w.values();
    let coeff = |i: usize| c.map_or(0.0, |c| c.at(i));
    for i in g.interior() {
        let slope = godunov_slope(v[i - 1], v[i], v[i + 1], g.h());
        let lhs = -apply_at(k, w, i)? + coeff(i) * slope;
        if lhs > tol {
            return Err(Error::Precondition {
                reason: format!("-L[w] + c|Dw| = {lhs:e} > tol at x = {}", g.x(i)),
            });
        }
    }

    let sup_c = g.interior().map(|i| coeff(i).abs()).fold(0.0, f64::max);
    let constant = 3.0 + sup_c;
    let tolerance_used = constant * tol;
    let max_value = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let at_max = |i: usize| v[i] >= max_value - tolerance_used;
    let origin_first = |a: &usize, b: &usize| math::abs(g.x(*a)).total_cmp(&math::abs(g.x(*b)));
    let Some(start) = g.interior().filter(|&i| v[i] == max_value).min_by(origin_first).or_else(|| {
        g.interior().filter(|&i| at_max(i)).max_by(|&a, &b| v[a].total_cmp(&v[b]))
    }) else {
        return Ok(PropagationReport {
            interior_max: false,
            max_value,
            x0: None,
            propagation_radius: 0.0,
            full_grid: false,
            reached: 0,
            defect: 0.0,
            tolerance_used,
            constant,
        });
    };

    let n = k.half_width() as isize;
    let mut reached = vec![false; g.len()];
    let mut queue = VecDeque::from([start]);
    reached[start] = true;
    let mut defect: f64 = 0.0;
    while let Some(i) = queue.pop_front() {
        if !g.is_interior(i) {
            continue;
        }
        for j in -n..=n {
            if k.mass_at(j) <= 0.0 {
                continue;
            }
            let q = (i as isize + j) as usize;
            defect = defect.max(max_value - v[q]);
            if !reached[q] && at_max(q) {
                reached[q] = true;
                queue.push_back(q);
            }
        }
    }

    let x0 = g.x(start);
    let dist = |i: usize| math::abs(g.x(i) - x0);
    let propagation_radius = match g.interior().filter(|&i| !reached[i]).map(dist).reduce(f64::min) {
        Some(d) => (d - g.h()).max(0.0),
        None => g.interior().map(dist).fold(0.0, f64::max),
    };
    Ok(PropagationReport {
        interior_max: true,
        max_value,
        x0: Some(x0),
        propagation_radius,
        full_grid: g.interior().all(|i| reached[i]),
        reached: reached.iter().filter(|&&r| r).count(),
        defect,
        tolerance_used,
        constant,
    })
}
