//! Scalar abstraction for the nodewise solver.
//!
//! `f64` covers every ordinary run. [`Wide`] keeps an `f64` mantissa with a separate
//! 64-bit binary exponent so that sources such as `exp(a^|x|)` stay representable at
//! radii where `f64` overflows.

use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::math;

pub trait Real:
    Copy
    + PartialOrd
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Lossy conversion; saturates to `±inf` or `0`.
    fn to_f64(self) -> f64;
    /// `e^l`.
    fn exp_of(l: f64) -> Self;
    /// Natural log of a positive value.
    fn ln(self) -> f64;
    /// `self^p` for `self >= 0`.
    fn powf(self, p: f64) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn exp_of(l: f64) -> Self {
        math::exp(l)
    }
    #[inline]
    fn ln(self) -> f64 {
        math::ln(self)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        math::powf(self, p)
    }
    #[inline]
    fn abs(self) -> Self {
        math::abs(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
const LN2: f64 = core::f64::consts::LN_2;

/// `mant * 2^exp` with `|mant|` in `[0.5, 1)`, or `mant` zero / non-finite and `exp == 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wide {
    mant: f64,
    exp: i64,
}

impl Wide {
    #[inline]
    fn normalized(mant: f64, exp: i64) -> Self {
        if mant == 0.0 || !mant.is_finite() {
            return Wide { mant, exp: 0 };
        }
        let (m, e) = libm::frexp(mant);
        Wide { mant: m, exp: exp + e as i64 }
    }

    /// Binary exponent of the value, for diagnostics.
    pub fn binary_exponent(self) -> i64 {
        self.exp
    }

    /// Base-10 logarithm of `|self|`; `-inf` at zero.
    pub fn log10_abs(self) -> f64 {
        if self.mant == 0.0 {
            return f64::NEG_INFINITY;
        }
        (math::ln(math::abs(self.mant)) + self.exp as f64 * LN2) / core::f64::consts::LN_10
    }
}

impl fmt::Display for Wide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_f64();
        if v.is_finite() && (v == 0.0 || self.exp.abs() < 1000) {
            write!(f, "{v:e}")
        } else if !self.mant.is_finite() {
            write!(f, "{}", self.mant)
        } else {
            let l10 = self.log10_abs();
            let e10 = math::floor(l10);
            let m10 = math::powf(10.0, l10 - e10);
            let sign = if self.mant < 0.0 { "-" } else { "" };
            write!(f, "{sign}{m10:.6}e{}", e10 as i64)
        }
    }
}

impl Add for Wide {
    type Output = Wide;
    #[inline]
    fn add(self, rhs: Wide) -> Wide {
        if self.mant == 0.0 {
            return rhs;
        }
        if rhs.mant == 0.0 {
            return self;
        }
        if !self.mant.is_finite() || !rhs.mant.is_finite() {
            return Wide { mant: self.mant + rhs.mant, exp: 0 };
        }
        let (big, small) = if self.exp >= rhs.exp { (self, rhs) } else { (rhs, self) };
        let shift = small.exp - big.exp;
        if shift < -60 {
            return big;
        }
        Wide::normalized(big.mant + libm::ldexp(small.mant, shift as i32), big.exp)
    }
}

impl Neg for Wide {
    type Output = Wide;
    #[inline]
    fn neg(self) -> Wide {
        Wide { mant: -self.mant, exp: self.exp }
    }
}

impl Sub for Wide {
    type Output = Wide;
    #[inline]
    fn sub(self, rhs: Wide) -> Wide {
        self + (-rhs)
    }
}

impl Mul for Wide {
    type Output = Wide;
    #[inline]
    fn mul(self, rhs: Wide) -> Wide {
        Wide::normalized(self.mant * rhs.mant, self.exp + rhs.exp)
    }
}

impl Div for Wide {
    type Output = Wide;
    #[inline]
    fn div(self, rhs: Wide) -> Wide {
        if rhs.mant == 0.0 || !rhs.mant.is_finite() || !self.mant.is_finite() {
            return Wide { mant: self.mant / rhs.mant, exp: 0 };
        }
        Wide::normalized(self.mant / rhs.mant, self.exp - rhs.exp)
    }
}

impl PartialOrd for Wide {
    fn partial_cmp(&self, other: &Wide) -> Option<Ordering> {
        (*self - *other).mant.partial_cmp(&0.0)
    }
}

impl Real for Wide {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Wide::normalized(x, 0)
    }

    fn to_f64(self) -> f64 {
        let e = self.exp.clamp(-4000, 4000) as i32;
        libm::ldexp(self.mant, e)
    }

    fn exp_of(l: f64) -> Self {
        if l.is_nan() {
            return Wide { mant: f64::NAN, exp: 0 };
        }
        if l == f64::INFINITY {
            return Wide { mant: f64::INFINITY, exp: 0 };
        }
        if l == f64::NEG_INFINITY {
            return Wide { mant: 0.0, exp: 0 };
        }
        let k = math::round(l / LN2);
        let r = (l - k * LN2_HI) - k * LN2_LO;
        Wide::normalized(math::exp(r), k as i64)
    }

    fn ln(self) -> f64 {
        math::ln(self.mant) + self.exp as f64 * LN2
    }

    fn powf(self, p: f64) -> Self {
        if self.mant == 0.0 {
            return if p > 0.0 { self } else { Wide::from_f64(math::powf(0.0, p)) };
        }
        if p == 1.0 {
            return self;
        }
        Wide::exp_of(p * self.ln())
    }

    #[inline]
    fn abs(self) -> Self {
        Wide { mant: math::abs(self.mant), exp: self.exp }
    }

    #[inline]
    fn is_finite(self) -> bool {
        self.mant.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(x: f64) -> Wide {
        Wide::from_f64(x)
    }

    #[test]
    fn arithmetic_matches_f64() {
        let (a, b) = (3.25, -1.75e-3);
        assert_eq!((w(a) + w(b)).to_f64(), a + b);
        assert_eq!((w(a) * w(b)).to_f64(), a * b);
        assert_eq!((w(a) / w(b)).to_f64(), a / b);
        assert!(w(a) > w(b));
        assert_eq!(w(0.0) + w(2.0), w(2.0));
    }

    #[test]
    fn beyond_f64_range() {
        let big = Wide::exp_of(5000.0);
        assert!(big.is_finite());
        assert!(!big.to_f64().is_finite());
        assert!((big.ln() - 5000.0).abs() < 1e-9);
        let cube = big.powf(3.0);
        assert!((cube.ln() - 15000.0).abs() < 1e-8);
        let back = cube / big / big;
        assert!((back.ln() - 5000.0).abs() < 1e-8);
        assert!(big + w(1.0) == big);
    }

    proptest! {
        #[test]
        fn round_trip_and_order(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            prop_assert_eq!(w(a).to_f64(), a);
            prop_assert_eq!(w(a) < w(b), a < b);
            let s = (w(a) + w(b)).to_f64();
            prop_assert!((s - (a + b)).abs() <= 1e-15 * (a.abs() + b.abs()));
        }

        #[test]
        fn exp_ln_consistent(l in -2000f64..2000.0) {
            let x = Wide::exp_of(l);
            prop_assert!((x.ln() - l).abs() <= 1e-12 * (1.0 + l.abs()));
        }
    }
}
