use alloc::format;

use super::source::SourceSpec;
use crate::error::{Error, Result};
use crate::grid_kernel::{Grid, GridFunction};
use crate::math;
use crate::real::Real;

/// A closed-form radial profile that can be sampled on any grid.
pub trait Profile: Clone + Send + Sync + 'static {
    /// `NaN` where the profile is undefined.
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;

    /// Samples on `grid`, keeping the closed form as the extension rule.
    fn sample(&self, grid: Grid) -> Result<GridFunction> {
        let p = self.clone();
        GridFunction::from_fn(grid, move |x| p.value(x))
    }
}

/// Outward scan resolution and reach for onset radii.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanOptions {
    pub cells_per_unit: usize,
    pub horizon: f64,
}

impl ScanOptions {
    pub fn new(h: f64, horizon: f64) -> Result<ScanOptions> {
        let cells_per_unit = crate::grid_kernel::Grid::new(1.0, h)?.cells_per_unit();
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter { name: "horizon", value: horizon, reason: "must be positive" });
        }
        Ok(ScanOptions { cells_per_unit, horizon })
    }

    pub fn step(&self) -> f64 {
        1.0 / self.cells_per_unit as f64
    }

    fn steps(&self) -> usize {
        math::round(self.horizon * self.cells_per_unit as f64) as usize
    }

    fn radius(&self, k: usize) -> f64 {
        k as f64 / self.cells_per_unit as f64
    }

    /// Smallest lattice radius `r` with `holds(s)` for every lattice `s` in `[r, horizon]`.
    fn onset(&self, holds: impl Fn(f64) -> bool) -> Option<f64> {
        let n = self.steps();
        if !holds(self.radius(n)) {
            return None;
        }
        let mut k = n;
        while k > 0 && holds(self.radius(k - 1)) {
            k -= 1;
        }
        Some(self.radius(k))
    }
}

/// `Phi(x) = |x| f(x)^{1/m}`.
#[derive(Clone, Debug)]
pub struct Phi {
    spec: SourceSpec,
}

pub fn build_phi(spec: &SourceSpec) -> Phi {
    Phi { spec: spec.clone() }
}

impl Phi {
    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    fn defined_at(&self, x: f64) -> Result<()> {
        if x != 0.0 && !(self.spec.ln_value(x) > f64::NEG_INFINITY) {
            return Err(Error::Precondition { reason: format!("Phi undefined at x = {x}: f(x) <= 0") });
        }
        Ok(())
    }

    /// `ln Phi(x)`; `-inf` at the origin.
    pub fn ln_value(&self, x: f64) -> f64 {
        if x == 0.0 {
            return f64::NEG_INFINITY;
        }
        math::ln(math::abs(x)) + self.spec.ln_value(x) / self.spec.m
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        self.defined_at(x)?;
        Ok(math::exp(self.ln_value(x)))
    }

    pub fn value_real<T: Real>(&self, x: f64) -> Result<T> {
        if x == 0.0 {
            return Ok(T::zero());
        }
        self.defined_at(x)?;
        Ok(T::exp_of(self.ln_value(x)))
    }

    /// `Phi'(x) = f^{1/m} (sgn x + |x| f'/(m f))`; the right derivative at 0.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.defined_at(x)?;
        let sgn = if x < 0.0 { -1.0 } else { 1.0 };
        let lf = self.spec.ln_value(x);
        Ok(math::exp(lf / self.spec.m) * (sgn + math::abs(x) * self.spec.dlog(x) / self.spec.m))
    }

    /// `ln |Phi'(x)|`, finite even where `Phi'` overflows.
    pub fn ln_abs_derivative(&self, x: f64) -> f64 {
        let sgn = if x < 0.0 { -1.0 } else { 1.0 };
        let lf = self.spec.ln_value(x);
        lf / self.spec.m + math::ln(math::abs(sgn + math::abs(x) * self.spec.dlog(x) / self.spec.m))
    }
}

/// `Theta(x) = kappa (|x| - R_star)_+`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Theta {
    pub kappa: f64,
    pub r_star: f64,
    pub horizon: f64,
}

impl Theta {
    /// `Theta` with `R_star = 0` or the identically zero profile (`kappa = 0`).
    pub fn new(kappa: f64, r_star: f64) -> Theta {
        Theta { kappa, r_star, horizon: r_star }
    }

    pub fn zero() -> Theta {
        Theta { kappa: 0.0, r_star: 0.0, horizon: 0.0 }
    }
}

impl Profile for Theta {
    fn value(&self, x: f64) -> f64 {
        self.kappa * math::pos(math::abs(x) - self.r_star)
    }

    fn derivative(&self, x: f64) -> f64 {
        if math::abs(x) <= self.r_star {
            0.0
        } else if x > 0.0 {
            self.kappa
        } else {
            -self.kappa
        }
    }
}

/// Subsolution `Theta_lambda` with `R_star` the first lattice radius beyond which `f >= lambda + kappa^m`.
pub fn build_theta(spec: &SourceSpec, lambda: f64, kappa: f64, scan: &ScanOptions) -> Result<Theta> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter { name: "kappa", value: kappa, reason: "must be positive" });
    }
    let min_f = spec.min_value();
    if lambda > min_f {
        return Err(Error::ThetaLambda { lambda, min_f });
    }
    let level = lambda + math::powf(kappa, spec.m);
    let holds = |r: f64| [r, -r].iter().all(|&x| matches!(spec.value(x), Ok(v) if v >= level));
    let r_star = scan
        .onset(holds)
        .ok_or(Error::NoThetaRadius { lambda, kappa, horizon: scan.horizon })?;
    Ok(Theta { kappa, r_star, horizon: scan.horizon })
}

/// `Psi = (1 - chi) c|x| + chi c Phi`, with `chi` the quintic smoothstep on `[R_upper, R_upper + 1]`.
#[derive(Clone, Debug)]
pub struct Psi {
    phi: Phi,
    c: f64,
    r_upper: f64,
}

impl Psi {
    pub fn coefficient(&self) -> f64 {
        self.c
    }

    pub fn r_upper(&self) -> f64 {
        self.r_upper
    }

    /// `k * Psi`.
    pub fn times(&self, k: f64) -> Psi {
        Psi { phi: self.phi.clone(), c: self.c * k, r_upper: self.r_upper }
    }

    pub fn chi(&self, x: f64) -> f64 {
        math::smoothstep(math::abs(x) - self.r_upper)
    }

    pub fn value_real<T: Real>(&self, x: f64) -> Result<T> {
        let chi = self.chi(x);
        if chi >= 1.0 {
            let phi: T = self.phi.value_real(x)?;
            return Ok(T::from_f64(self.c) * phi);
        }
        Ok(T::from_f64(self.try_value(x)?))
    }

    fn try_value(&self, x: f64) -> Result<f64> {
        let r = math::abs(x);
        let chi = self.chi(x);
        if chi == 0.0 {
            return Ok(self.c * r);
        }
        let phi = self.phi.value(x)?;
        Ok((1.0 - chi) * self.c * r + chi * self.c * phi)
    }
}

impl Profile for Psi {
    fn value(&self, x: f64) -> f64 {
        self.try_value(x).unwrap_or(f64::NAN)
    }

    fn derivative(&self, x: f64) -> f64 {
        let r = math::abs(x);
        let sgn = if x < 0.0 { -1.0 } else { 1.0 };
        let s = r - self.r_upper;
        let chi = math::smoothstep(s);
        if chi == 0.0 {
            return sgn * self.c;
        }
        let dchi = math::smoothstep_derivative(s);
        let (phi, dphi) = match (self.phi.value(x), self.phi.derivative(x)) {
            (Ok(p), Ok(d)) => (p, d),
            _ => return f64::NAN,
        };
        sgn * ((1.0 - chi) * self.c + dchi * self.c * (phi - r)) + chi * self.c * dphi
    }
}

/// `C^2` regularization used by the discounted chain: `2 Psi` for `|x| >= R_star`,
/// the even quadratic matching value and slope inside, clipped at 0.
#[derive(Clone, Debug)]
pub struct PsiBar {
    outer: Psi,
    r_star: f64,
    a: f64,
    b: f64,
}

impl PsiBar {
    pub fn new(psi: &Psi, r_star: f64) -> PsiBar {
        let outer = psi.times(2.0);
        let (a, b) = if r_star > 0.0 {
            let slope = outer.derivative(r_star);
            let b = slope / (2.0 * r_star);
            (outer.value(r_star) - b * r_star * r_star, b)
        } else {
            (0.0, 0.0)
        };
        PsiBar { outer, r_star, a, b }
    }

    pub fn r_star(&self) -> f64 {
        self.r_star
    }

    pub fn value_real<T: Real>(&self, x: f64) -> Result<T> {
        if math::abs(x) >= self.r_star {
            self.outer.value_real(x)
        } else {
            Ok(T::from_f64(self.value(x)))
        }
    }
}

impl Profile for PsiBar {
    fn value(&self, x: f64) -> f64 {
        if math::abs(x) >= self.r_star {
            self.outer.value(x)
        } else {
            math::pos(self.a + self.b * x * x)
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        if math::abs(x) >= self.r_star {
            self.outer.derivative(x)
        } else if self.a + self.b * x * x > 0.0 {
            2.0 * self.b * x
        } else {
            0.0
        }
    }
}

/// Constants of the supersolution construction.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Barriers {
    pub lambda: f64,
    /// Onset of `f >= lambda' + kappa^m` with `lambda' = min(lambda, min f)`.
    pub r_star: f64,
    pub kappa: f64,
    /// Onset of `f >= 1`, (H1) and (H2).
    pub r_upper: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_star: f64,
    /// `K = (R_upper + 1) + sup Phi` over `R_upper <= |x| <= R_upper + 2`.
    pub k_interp: f64,
    pub c_lambda: f64,
    pub horizon: f64,
}

/// Sup of `g` over lattice points with `lo <= |x| <= hi`, both signs.
fn sup_over(scan: &ScanOptions, lo: f64, hi: f64, g: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let n = scan.cells_per_unit as f64;
    let (k0, k1) = (math::round(lo * n) as i64, math::round(hi * n) as i64);
    let mut sup = f64::NEG_INFINITY;
    for k in k0..=k1 {
        let r = k as f64 / n;
        sup = sup.max(g(r)?).max(g(-r)?);
    }
    Ok(sup)
}

/// (H1) at `x`: `ln sup_{B_1(x)} |Phi'| <= m ln |Phi'(x)|`, sampled at spacing `step`.
pub(crate) fn h1_holds(phi: &Phi, x: f64, step: f64) -> bool {
    let m = phi.spec().m;
    let here = phi.ln_abs_derivative(x);
    if !here.is_finite() {
        return false;
    }
    let bound = m * here;
    let k = math::round(1.0 / step) as i64;
    for j in -k..=k {
        let y = x + j as f64 * step;
        let v = phi.ln_abs_derivative(y);
        if v.is_nan() || v > bound {
            return false;
        }
    }
    true
}

/// (H2) at `x`: `x f'(x) >= -f(x)`.
pub(crate) fn h2_holds(spec: &SourceSpec, x: f64) -> bool {
    let d = x * spec.dlog(x);
    d >= -1.0
}

/// Builds `Psi` and its constants. `Psi_lambda = c_lambda Psi` with `c_lambda = 2 + lambda^-`.
pub fn build_psi(spec: &SourceSpec, lambda: f64, scan: &ScanOptions) -> Result<(Psi, Barriers)> {
    build_psi_beyond(spec, lambda, scan, 0.0)
}

/// As [`build_psi`], with `R_upper` raised to at least `min_r_upper`.
pub fn build_psi_beyond(
    spec: &SourceSpec,
    lambda: f64,
    scan: &ScanOptions,
    min_r_upper: f64,
) -> Result<(Psi, Barriers)> {
    spec.validate()?;
    let m = spec.m;
    let phi = build_phi(spec);
    let sub = scan.step().min(0.05);
    let admissible = |r: f64| {
        [r, -r].iter().all(|&x| {
            let lf = spec.ln_value(x);
            lf >= 0.0 && h2_holds(spec, x) && h1_holds(&phi, x, sub)
        })
    };
    let r_upper = scan.onset(admissible).ok_or_else(|| Error::PsiConstruction {
        inequality: "f >= 1, (H1), (H2) beyond R_upper",
        detail: format!("violated at the scan horizon {}", scan.horizon),
    })?
    .max(min_r_upper);
    let f_at = |x: f64| spec.value(x);
    let finite = |v: f64, what: &'static str| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::PsiConstruction { inequality: what, detail: format!("sup is not finite (R_upper = {r_upper})") })
        }
    };
    let max_f_ball = finite(sup_over(scan, 0.0, r_upper + 1.0, f_at)?, "c^m - c >= max f")?;
    let sup_f_annulus = finite(sup_over(scan, r_upper, r_upper + 1.0, f_at)?, "interpolation zone")?;
    let sup_phi = finite(sup_over(scan, r_upper, r_upper + 2.0, |x| phi.value(x))?, "interpolation zone")?;
    let k_interp = (r_upper + 1.0) + sup_phi;

    let cap = 1e150;
    let g = |c: f64| math::powf(c, m) - c;
    let c0 = math::smallest_root(g, max_f_ball, 1.0, cap).ok_or_else(|| Error::PsiConstruction {
        inequality: "c^m - c >= max f on B_{R_upper+1}",
        detail: format!("max f = {max_f_ball}"),
    })?;
    let c1 = math::smallest_root(g, m / (m - 1.0), 1.0, cap).ok_or_else(|| Error::PsiConstruction {
        inequality: "c^m - c >= m/(m-1)",
        detail: format!("m = {m}"),
    })?;
    let q = math::powf(1.0 - 1.0 / m, m);
    let turning = math::powf(k_interp / (m * q), 1.0 / (m - 1.0)).max(1.0);
    let c2 = math::smallest_root(|c| math::powf(c, m) * q - k_interp * c, sup_f_annulus, turning, cap)
        .ok_or_else(|| Error::PsiConstruction {
            inequality: "-K c + c^m (1-1/m)^m >= sup f on the annulus",
            detail: format!("K = {k_interp}, sup f = {sup_f_annulus}"),
        })?;
    let c_star = c0.max(c1).max(c2);
    let lhs = g(c_star);
    if lhs < max_f_ball || lhs < m / (m - 1.0) {
        return Err(Error::PsiConstruction {
            inequality: "c_star^m - c_star",
            detail: format!("{lhs} below required bound"),
        });
    }
    let theta_lambda = lambda.min(spec.min_value());
    let r_star = build_theta(spec, theta_lambda, 1.0, scan)?.r_star;
    let barriers = Barriers {
        lambda,
        r_star,
        kappa: 1.0,
        r_upper,
        c0,
        c1,
        c2,
        c_star,
        k_interp,
        c_lambda: 2.0 + math::neg_part(lambda),
        horizon: scan.horizon,
    };
    Ok((Psi { phi, c: c_star, r_upper }, barriers))
}
