use core::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::math;

/// Uniform symmetric lattice on `[-(R+1), R+1]`.
///
/// Nodes are addressed by index `0..len()`; node `center()` sits at `x = 0`.
/// Nodes with `|x| < R` form the interior, the rest the outer band.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    radius: f64,
    cells_per_unit: usize,
    radius_cells: usize,
}

pub(crate) fn cells_per_unit(h: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidSpacing { h, reason: "spacing must be positive and finite" });
    }
    let n = math::round(1.0 / h);
    if n < 1.0 || math::abs(n * h - 1.0) > 1e-12 {
        return Err(Error::InvalidSpacing { h, reason: "1/h is not an integer" });
    }
    Ok(n as usize)
}

impl Grid {
    pub fn new(radius: f64, h: f64) -> Result<Grid> {
        let n = cells_per_unit(h)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter { name: "R", value: radius, reason: "must be positive" });
        }
        let cells = math::round(radius * n as f64);
        if math::abs(cells - radius * n as f64) > 1e-9 * (1.0 + cells) {
            return Err(Error::InvalidParameter {
                name: "R",
                value: radius,
                reason: "R must be a multiple of h",
            });
        }
        Ok(Grid { radius: cells / n as f64, cells_per_unit: n, radius_cells: cells as usize })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_unit as f64
    }

    /// Number of cells per unit length, `1/h`.
    pub fn cells_per_unit(&self) -> usize {
        self.cells_per_unit
    }

    /// `R/h`.
    pub fn radius_cells(&self) -> usize {
        self.radius_cells
    }

    /// `(R+1)/h`: index distance from the center to either end.
    pub fn half_len(&self) -> usize {
        self.radius_cells + self.cells_per_unit
    }

    pub fn len(&self) -> usize {
        2 * self.half_len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self) -> usize {
        self.half_len()
    }

    /// Signed offset of node `i` from the center, in cells.
    #[inline]
    pub fn offset(&self, i: usize) -> isize {
        i as isize - self.center() as isize
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.offset(i) as f64 / self.cells_per_unit as f64
    }

    /// Coordinate of a possibly out-of-range signed index.
    #[inline]
    pub fn x_of(&self, idx: isize) -> f64 {
        (idx - self.center() as isize) as f64 / self.cells_per_unit as f64
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.offset(i).unsigned_abs() < self.radius_cells
    }

    pub fn is_band(&self, i: usize) -> bool {
        !self.is_interior(i)
    }

    /// Indices with `|x| < R`.
    pub fn interior(&self) -> RangeInclusive<usize> {
        let c = self.center();
        let r = self.radius_cells - 1;
        (c - r)..=(c + r)
    }

    /// Index of the node at `x`, if `x` is (within rounding) a node of this grid.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let k = math::round(x * self.cells_per_unit as f64);
        if math::abs(k - x * self.cells_per_unit as f64) > 1e-7 {
            return None;
        }
        let idx = k as isize + self.center() as isize;
        (idx >= 0 && (idx as usize) < self.len()).then_some(idx as usize)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.x(i))
    }

    /// Same spacing, different radius.
    pub fn with_radius(&self, radius: f64) -> Result<Grid> {
        Grid::new(radius, self.h())
    }
}
