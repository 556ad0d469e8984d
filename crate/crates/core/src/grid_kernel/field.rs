use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use super::grid::Grid;
use crate::error::{Error, Result};

/// How a grid function is continued beyond `|x| = R + 1`.
#[derive(Clone, Default)]
pub enum Extension {
    /// Reads outside the stored nodes are errors.
    #[default]
    None,
    /// Repeat the end value.
    Constant,
    /// Continue with the slope of the last cell.
    Linear,
    /// Evaluate a closed form.
    Formula(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Extension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extension::None => f.write_str("None"),
            Extension::Constant => f.write_str("Constant"),
            Extension::Linear => f.write_str("Linear"),
            Extension::Formula(_) => f.write_str("Formula(..)"),
        }
    }
}

/// Values on every node of a [`Grid`] plus a tail model.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    extension: Extension,
}

fn check_finite(grid: &Grid, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite { context: "grid function", x: grid.x(i) }),
        None => Ok(()),
    }
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        check_finite(&grid, &values)?;
        Ok(GridFunction { grid, values, extension: Extension::None })
    }

    /// Samples `f` on the grid and keeps it as the tail model.
    /// Unchecked constructor; values may be non-finite.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>, extension: Extension) -> GridFunction {
        GridFunction { grid, values, extension }
    }

    pub fn from_fn<F>(grid: Grid, f: F) -> Result<GridFunction>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let values = grid.nodes().map(&f).collect::<Vec<_>>();
        check_finite(&grid, &values)?;
        Ok(GridFunction { grid, values, extension: Extension::Formula(Arc::new(f)) })
    }

    pub fn constant(grid: Grid, c: f64) -> Result<GridFunction> {
        Ok(GridFunction::new(grid, alloc::vec![c; grid.len()])?.with_extension(Extension::Constant))
    }

    pub fn with_extension(mut self, extension: Extension) -> GridFunction {
        self.extension = extension;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn extension(&self) -> &Extension {
        &self.extension
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn at_zero(&self) -> f64 {
        self.values[self.grid.center()]
    }

    /// Value at a signed node index; indices outside `0..len` go through the extension rule.
    pub fn at_index(&self, idx: isize) -> Result<f64> {
        let len = self.values.len() as isize;
        if (0..len).contains(&idx) {
            return Ok(self.values[idx as usize]);
        }
        let x = self.grid.x_of(idx);
        let (end, inner, dist) = if idx < 0 {
            (0usize, 1usize, -idx)
        } else {
            (len as usize - 1, len as usize - 2, idx - (len - 1))
        };
        let v = match &self.extension {
            Extension::None => return Err(Error::StencilOutOfDomain { node: idx, x }),
            Extension::Constant => self.values[end],
            Extension::Linear => {
                let step = self.values[end] - self.values[inner];
                self.values[end] + step * dist as f64
            }
            Extension::Formula(f) => f(x),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { context: "extension", x })
        }
    }

    /// Piecewise-linear interpolation inside the grid, extension rule outside.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let n = self.grid.cells_per_unit() as f64;
        let s = x * n + self.grid.center() as f64;
        let last = (self.values.len() - 1) as f64;
        if (0.0..=last).contains(&s) {
            let k = crate::math::floor(s);
            let t = s - k;
            let k = k as usize;
            if t < 1e-9 || k as f64 == last {
                return Ok(self.values[k]);
            }
            if t > 1.0 - 1e-9 {
                return Ok(self.values[k + 1]);
            }
            return Ok((1.0 - t) * self.values[k] + t * self.values[k + 1]);
        }
        match &self.extension {
            Extension::Formula(f) => {
                let v = f(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { context: "extension", x })
                }
            }
            Extension::None => Err(Error::StencilOutOfDomain { node: crate::math::round(s) as isize, x }),
            _ => {
                let k = crate::math::floor(s) as isize;
                let t = s - k as f64;
                let (a, b) = (self.at_index(k)?, self.at_index(k + 1)?);
                Ok((1.0 - t) * a + t * b)
            }
        }
    }

    /// Nodewise map; the extension becomes `None`.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        let values = (0..self.len()).map(|i| f(self.grid.x(i), self.values[i])).collect();
        GridFunction::new(self.grid, values)
    }

    /// `self - other` on a common grid.
    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        GridFunction::new(self.grid, values)
    }

    /// Central portion on the grid of truncation radius `radius` (nodes `|x| <= radius + 1`).
    pub fn restrict(&self, radius: f64) -> Result<GridFunction> {
        let sub = self.grid.with_radius(radius)?;
        if sub.half_len() > self.grid.half_len() {
            return Err(Error::GridMismatch);
        }
        let start = self.grid.center() - sub.half_len();
        let values = self.values[start..start + sub.len()].to_vec();
        Ok(GridFunction { grid: sub, values, extension: self.extension.clone() })
    }

    /// Sup over nodes with `|x| <= r`.
    pub fn sup_abs_within(&self, r: f64) -> f64 {
        (0..self.len())
            .filter(|&i| self.grid.x(i).abs() <= r + 1e-12)
            .map(|i| self.values[i].abs())
            .fold(0.0, f64::max)
    }
}
