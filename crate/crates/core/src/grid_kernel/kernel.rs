use alloc::vec::Vec;

use super::grid::cells_per_unit;
use crate::error::{Error, Result};
use crate::math;

/// Shape of the convolution density on `[-1, 1]`.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum KernelProfile {
    /// `(15/16)(1 - x^2)^2`.
    Biweight,
    /// `(35/32)(1 - x^2)^3`.
    Triweight,
    /// User density; must be even, nonincreasing in `|x|`, positive inside and C¹-flat at `±1`.
    #[cfg_attr(feature = "serde", serde(skip))]
    Custom(fn(f64) -> f64),
}

/// Custom densities compare by function address.
impl PartialEq for KernelProfile {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (KernelProfile::Biweight, KernelProfile::Biweight) | (KernelProfile::Triweight, KernelProfile::Triweight) => true,
            (KernelProfile::Custom(a), KernelProfile::Custom(b)) => core::ptr::fn_addr_eq(*a, *b),
            _ => false,
        }
    }
}

impl KernelProfile {
    pub fn density(&self, x: f64) -> f64 {
        if math::abs(x) >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - x * x;
        match self {
            KernelProfile::Biweight => 15.0 / 16.0 * s * s,
            KernelProfile::Triweight => 35.0 / 32.0 * s * s * s,
            KernelProfile::Custom(j) => j(x),
        }
    }
}

/// Mass-normalized quadrature of `J` on the lattice `jh`, `|j| <= 1/h`.
#[derive(Clone, Debug)]
pub struct Kernel {
    profile: KernelProfile,
    n: usize,
    raw: Vec<f64>,
    weights: Vec<f64>,
    masses: Vec<f64>,
    positive: bool,
}

/// Quadrature of `J` with the given profile. `1/h` must be an integer.
pub fn build_kernel(profile: KernelProfile, h: f64) -> Result<Kernel> {
    let n = cells_per_unit(h)?;
    if n < 2 {
        return Err(Error::InvalidSpacing { h, reason: "need at least two cells per unit" });
    }
    if let KernelProfile::Custom(_) = profile {
        validate_profile(&profile)?;
    }
    let h = 1.0 / n as f64;
    let raw: Vec<f64> = (-(n as isize)..=n as isize)
        .map(|j| profile.density(j as f64 * h))
        .collect();
    for j in 1..n {
        let (inner, outer) = (raw[n + j - 1], raw[n + j]);
        if !(outer > 0.0) || outer > inner || raw[n - j] != raw[n + j] {
            return Err(Error::KernelProfile {
                reason: "sampled weights are not even, positive and nonincreasing on the open support",
            });
        }
    }
    Ok(Kernel::from_raw(profile, n, raw, true))
}

fn validate_profile(profile: &KernelProfile) -> Result<()> {
    let j0 = profile.density(0.0);
    if !(j0 > 0.0) || !j0.is_finite() {
        return Err(Error::KernelProfile { reason: "density must be positive at the origin" });
    }
    // Evaluate the raw closure at the support edge, bypassing the |x| >= 1 cutoff.
    let raw = |x: f64| match profile {
        KernelProfile::Custom(j) => j(x),
        _ => profile.density(x),
    };
    if math::abs(raw(1.0)) > 1e-12 * j0 || math::abs(raw(-1.0)) > 1e-12 * j0 {
        return Err(Error::KernelProfile { reason: "density does not vanish at the support edge" });
    }
    let d = 1e-6;
    let slope = (raw(1.0) - raw(1.0 - d)) / d;
    if math::abs(slope) > 1e-3 * j0 {
        return Err(Error::KernelProfile { reason: "derivative does not vanish at the support edge (C1 matching)" });
    }
    Ok(())
}

impl Kernel {
    fn from_raw(profile: KernelProfile, n: usize, raw: Vec<f64>, positive: bool) -> Kernel {
        let h = 1.0 / n as f64;
        let total: f64 = raw.iter().sum::<f64>() * h;
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let masses: Vec<f64> = weights.iter().map(|w| w * h).collect();
        Kernel { profile, n, raw, weights, masses, positive }
    }

    /// Negative-control copy with the weights on `inner <= |jh| <= outer` set to zero, then renormalized.
    /// The result violates strict positivity on the support.
    pub fn with_zeroed_annulus(&self, inner: f64, outer: f64) -> Result<Kernel> {
        if !(0.0 < inner && inner <= outer && outer < 1.0) {
            return Err(Error::InvalidParameter {
                name: "annulus",
                value: inner,
                reason: "need 0 < inner <= outer < 1",
            });
        }
        let h = self.h();
        let mut raw = self.raw.clone();
        let mut zeroed = 0;
        for (idx, w) in raw.iter_mut().enumerate() {
            let r = math::abs((idx as f64 - self.n as f64) * h);
            if r >= inner - 1e-12 && r <= outer + 1e-12 {
                *w = 0.0;
                zeroed += 1;
            }
        }
        if zeroed == 0 {
            return Err(Error::InvalidParameter {
                name: "annulus",
                value: inner,
                reason: "annulus contains no lattice offsets",
            });
        }
        Ok(Kernel::from_raw(self.profile, self.n, raw, false))
    }

    pub fn profile(&self) -> KernelProfile {
        self.profile
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Stencil half-width in cells, `1/h`.
    pub fn half_width(&self) -> usize {
        self.n
    }

    pub fn support_radius(&self) -> f64 {
        1.0
    }

    /// Normalized density at offset `j`; zero outside the support.
    pub fn weight(&self, j: isize) -> f64 {
        self.index(j).map_or(0.0, |k| self.weights[k])
    }

    /// Density at offset `j` before renormalization.
    pub fn raw_weight(&self, j: isize) -> f64 {
        self.index(j).map_or(0.0, |k| self.raw[k])
    }

    /// Quadrature mass `a_j = weight(j) * h`.
    pub fn mass_at(&self, j: isize) -> f64 {
        self.index(j).map_or(0.0, |k| self.masses[k])
    }

    /// Masses indexed `0..=2n`, offset `j` stored at `j + n`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `sum a_j (jh)^2`.
    pub fn second_moment(&self) -> f64 {
        let h = self.h();
        self.masses
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let y = (k as f64 - self.n as f64) * h;
                a * y * y
            })
            .sum()
    }

    /// False for negative-control kernels with zeroed offsets.
    pub fn is_strictly_positive(&self) -> bool {
        self.positive
    }

    #[inline]
    fn index(&self, j: isize) -> Option<usize> {
        let k = j + self.n as isize;
        (k >= 0 && (k as usize) < self.masses.len()).then_some(k as usize)
    }
}
