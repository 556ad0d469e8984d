use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid_kernel::{Grid, GridFunction, Kernel};
use crate::real::Real;

/// Nodewise data of the truncated equation
/// `lambda - eps Lap_h v - L_R^psi[v] + |D_h v|^m + sigma v = f + sigma Theta` on `|x| < R`,
/// with band values held fixed.
///
/// Each interior node reads `A v_i - b_i + G_i^m = 0` with `A = 1 - a_0 + sigma + 2 eps/h^2`,
/// `b_i = rhs_i + sum_{j != 0} a_j v_{i-j} + eps (v_{i-1} + v_{i+1})/h^2` and the upwind
/// slope `G_i = max(v_i - min(v_{i-1}, v_{i+1}), 0)/h`.
#[derive(Clone, Debug)]
pub struct TruncatedProblem<T: Real = f64> {
    grid: Grid,
    masses: Vec<T>,
    center_mass: f64,
    m: f64,
    sigma: f64,
    epsilon: f64,
    /// `f + sigma Theta - lambda`, full length (band entries unused).
    rhs: Vec<T>,
    /// `1 + |f + sigma Theta|` for the scaled residual.
    scale: Vec<T>,
    /// Band values; interior entries ignored.
    band: Vec<T>,
    /// Add `sum_{j != 0} a_j |v_{i-j}|` to the residual scale.
    term_scaling: bool,
}

impl<T: Real> TruncatedProblem<T> {
    /// `rhs` and `band` are full-length node vectors.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Grid,
        kernel: &Kernel,
        m: f64,
        sigma: f64,
        epsilon: f64,
        rhs: Vec<T>,
        scale: Vec<T>,
        band: Vec<T>,
    ) -> Result<TruncatedProblem<T>> {
        if kernel.half_width() != grid.cells_per_unit() {
            return Err(Error::SpacingMismatch { grid_h: grid.h(), kernel_h: kernel.h() });
        }
        if rhs.len() != grid.len() || band.len() != grid.len() || scale.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        for i in 0..grid.len() {
            if grid.is_band(i) && !band[i].is_finite() {
                return Err(Error::NonFinite { context: "outer data", x: grid.x(i) });
            }
            if grid.is_interior(i) && !rhs[i].is_finite() {
                return Err(Error::NonFinite { context: "source", x: grid.x(i) });
            }
        }
        let n = kernel.half_width();
        Ok(TruncatedProblem {
            grid,
            masses: kernel.masses().iter().map(|&a| T::from_f64(a)).collect(),
            center_mass: kernel.masses()[n],
            m,
            sigma,
            epsilon,
            rhs,
            scale,
            band,
            term_scaling: false,
        })
    }

    /// Scales residuals by `1 + |rhs_i| + sum_{j != 0} a_j |v_{i-j}|`, the size of the terms
    /// meeting at node `i`. Needed when neighbor values exceed the local data by many orders.
    pub fn relative_to_terms(mut self) -> Self {
        self.term_scaling = true;
        self
    }

    fn term_scale(&self, v: &[T], i: usize) -> T {
        if !self.term_scaling {
            return self.scale[i];
        }
        let n = self.grid.cells_per_unit();
        let mut s = self.scale[i];
        for (q, (a, x)) in self.masses.iter().zip(&v[i - n..=i + n]).enumerate() {
            if q != n {
                s = s + *a * x.abs();
            }
        }
        s
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Full vector with band values applied and interior from `interior`.
    pub fn assemble(&self, interior: &[T]) -> Vec<T> {
        let mut v = interior.to_vec();
        for (i, slot) in v.iter_mut().enumerate() {
            if self.grid.is_band(i) {
                *slot = self.band[i];
            }
        }
        v
    }

    pub(crate) fn replace_rhs(&mut self, rhs: Vec<T>, scale: Vec<T>) {
        self.rhs = rhs;
        self.scale = scale;
    }

    pub(crate) fn replace_band(&mut self, band: Vec<T>) {
        self.band = band;
    }

    /// `f + sigma Theta - lambda` at node `i`.
    pub fn forcing(&self, i: usize) -> f64 {
        self.rhs[i].to_f64()
    }

    fn diag(&self) -> f64 {
        let h = self.grid.h();
        1.0 - self.center_mass + self.sigma + 2.0 * self.epsilon / (h * h)
    }

    /// `b_i` from the current neighbors.
    #[inline]
    fn offdiag(&self, v: &[T], i: usize) -> T {
        let n = self.grid.cells_per_unit();
        let h = self.grid.h();
        let window = &v[i - n..=i + n];
        let mut s = T::zero();
        for (q, (a, x)) in self.masses.iter().zip(window).enumerate() {
            if q != n {
                s = s + *a * *x;
            }
        }
        if self.epsilon > 0.0 {
            s = s + T::from_f64(self.epsilon / (h * h)) * (v[i - 1] + v[i + 1]);
        }
        self.rhs[i] + s
    }

    /// `F_i(v)`; positive means `v_i` is above the local solution.
    pub fn node_residual(&self, v: &[T], i: usize) -> T {
        let h = self.grid.h();
        let a = T::from_f64(self.diag());
        let nb = v[i - 1].min(v[i + 1]);
        let g = (v[i] - nb).max(T::zero()) / T::from_f64(h);
        a * v[i] - self.offdiag(v, i) + g.powf(self.m)
    }

    /// `(sup_i |F_i| / scale_i, sup_i |F_i|)` over interior nodes.
    pub fn residual(&self, v: &[T]) -> (f64, f64) {
        let mut scaled = 0.0f64;
        let mut abs = 0.0f64;
        for i in self.grid.interior() {
            let r = self.node_residual(v, i).abs();
            let (ra, rs) = (r.to_f64(), (r / self.term_scale(v, i)).to_f64());
            if ra.is_nan() || rs.is_nan() {
                return (f64::NAN, f64::NAN);
            }
            abs = abs.max(ra);
            scaled = scaled.max(rs);
        }
        (scaled, abs)
    }

    /// Residual per node (zero on the band).
    pub fn residual_profile(&self, v: &[T]) -> Vec<T> {
        (0..self.grid.len())
            .map(|i| if self.grid.is_interior(i) { self.node_residual(v, i) } else { T::zero() })
            .collect()
    }

    /// Exact solution of the scalar equation at node `i` with all neighbors frozen.
    #[inline]
    pub fn local_solve(&self, v: &[T], i: usize) -> T {
        let h = T::from_f64(self.grid.h());
        let a = T::from_f64(self.diag());
        let b = self.offdiag(v, i);
        let nb = v[i - 1].min(v[i + 1]);
        if a * nb >= b {
            return b / a;
        }
        // (y/h)^m + A y = d, y > 0; Newton from above is monotone for this convex map.
        let d = b - a * nb;
        let mut y = (d / a).min(h * d.powf(1.0 / self.m));
        for _ in 0..200 {
            let q = (y / h).powf(self.m - 1.0);
            let g = q * (y / h) + a * y - d;
            let dg = T::from_f64(self.m) * q / h + a;
            let next = y - g / dg;
            if !(next < y) || next <= T::zero() {
                break;
            }
            let step = (y - next).abs();
            y = next;
            if step <= T::from_f64(1e-15) * y {
                break;
            }
        }
        nb + y
    }

    /// One Gauss-Seidel pass over the interior, in place.
    pub fn sweep(&self, v: &mut [T], forward: bool) {
        let range = self.grid.interior();
        if forward {
            for i in range {
                v[i] = self.local_solve(v, i);
            }
        } else {
            for i in range.rev() {
                v[i] = self.local_solve(v, i);
            }
        }
    }

    /// Largest upwind slope over interior nodes.
    pub fn gradient_sup(&self, v: &[T]) -> T {
        let h = T::from_f64(self.grid.h());
        let mut sup = T::zero();
        for i in self.grid.interior() {
            let g = (v[i] - v[i - 1].min(v[i + 1])).max(T::zero()) / h;
            sup = sup.max(g);
        }
        sup
    }

    /// Step size keeping the explicit update order-preserving for slopes up to `g_hat`.
    pub fn stable_tau(&self, g_hat: f64, margin: f64) -> f64 {
        let h = self.grid.h();
        let gterm = self.m * crate::math::powf(g_hat, self.m - 1.0) * 2.0 / h;
        margin / (2.0 * self.epsilon / (h * h) + 1.0 + self.sigma + gterm)
    }

    /// `v - tau F(v)` on the interior; band values are kept.
    pub fn explicit_update(&self, v: &[T], tau: f64) -> Vec<T> {
        let t = T::from_f64(tau);
        let mut out = v.to_vec();
        for i in self.grid.interior() {
            out[i] = v[i] - t * self.node_residual(v, i);
        }
        out
    }
}

/// Full-length node vector from a grid function sampled at `grid` coordinates.
pub(crate) fn sample_on(grid: &Grid, f: &GridFunction) -> Result<Vec<f64>> {
    if f.grid() == grid {
        return Ok(f.values().to_vec());
    }
    grid.nodes().map(|x| f.eval(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_kernel::{build_kernel, KernelProfile};
    use proptest::prelude::*;

    fn toy(sigma: f64, eps: f64) -> TruncatedProblem<f64> {
        let g = Grid::new(2.0, 0.1).unwrap();
        let k = build_kernel(KernelProfile::Biweight, 0.1).unwrap();
        let rhs: Vec<f64> = g.nodes().map(|x| 1.0 + x * x).collect();
        let scale = rhs.iter().map(|r| 1.0 + r.abs()).collect();
        let band = g.nodes().map(|x| 2.0 * x.abs()).collect();
        TruncatedProblem::new(g, &k, 3.0, sigma, eps, rhs, scale, band).unwrap()
    }

    #[test]
    fn local_solve_zeroes_node_residual() {
        let p = toy(0.3, 0.01);
        let mut v = p.assemble(&alloc::vec![0.5; p.grid().len()]);
        v[20] = -3.0;
        for i in p.grid().interior() {
            let mut w = v.clone();
            w[i] = p.local_solve(&v, i);
            let r = p.node_residual(&w, i);
            assert!(r.abs() < 1e-10, "node {i}: {r}");
        }
    }

    proptest! {
        #[test]
        fn explicit_update_is_order_preserving(base in proptest::collection::vec(-2.0f64..2.0, 61), gap in proptest::collection::vec(0.0f64..1.0, 61), sigma in 0.0f64..1.0) {
            let p = toy(sigma, 0.0);
            let lo = p.assemble(&base);
            let hi_raw: Vec<f64> = base.iter().zip(&gap).map(|(b, g)| b + g).collect();
            let hi = p.assemble(&hi_raw);
            let g_hat = p.gradient_sup(&lo).max(p.gradient_sup(&hi));
            let tau = p.stable_tau(g_hat, 0.9);
            let (ulo, uhi) = (p.explicit_update(&lo, tau), p.explicit_update(&hi, tau));
            for i in 0..lo.len() {
                prop_assert!(ulo[i] <= uhi[i] + 1e-12);
            }
        }

        #[test]
        fn sweep_is_order_preserving(base in proptest::collection::vec(-2.0f64..2.0, 61), gap in proptest::collection::vec(0.0f64..1.0, 61), forward: bool) {
            let p = toy(0.2, 0.0);
            let mut lo = p.assemble(&base);
            let hi_raw: Vec<f64> = base.iter().zip(&gap).map(|(b, g)| b + g).collect();
            let mut hi = p.assemble(&hi_raw);
            p.sweep(&mut lo, forward);
            p.sweep(&mut hi, forward);
            for i in 0..lo.len() {
                prop_assert!(lo[i] <= hi[i] + 1e-12);
            }
        }
    }
}
