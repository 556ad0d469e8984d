//! Thin wrappers over `libm` so the crate stays `no_std`.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powf(x: f64, p: f64) -> f64 {
    libm::pow(x, p)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn ln1p(x: f64) -> f64 {
    libm::log1p(x)
}

/// `(x)_+`.
#[inline]
pub fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `(x)^- = max(-x, 0)`.
#[inline]
pub fn neg_part(x: f64) -> f64 {
    if x < 0.0 {
        -x
    } else {
        0.0
    }
}

/// Quintic smoothstep clamped to `[0, 1]`; C² with vanishing first and second derivatives at the ends.
#[inline]
pub fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * s * (s * (6.0 * s - 15.0) + 10.0)
    }
}

#[inline]
pub fn smoothstep_derivative(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        30.0 * s * s * (s - 1.0) * (s - 1.0)
    }
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + ln1p(exp(lo - hi))
}

/// Smallest `c >= c_min` with `g(c) >= target`, for `g` eventually increasing on `[c_min, inf)`.
/// Returns `None` when no bracket is found below `c_cap`.
pub fn smallest_root<G: Fn(f64) -> f64>(g: G, target: f64, c_min: f64, c_cap: f64) -> Option<f64> {
    if g(c_min) >= target {
        return Some(c_min);
    }
    let mut lo = c_min;
    let mut hi = if c_min > 0.0 { 2.0 * c_min } else { 1.0 };
    while g(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi > c_cap || !hi.is_finite() {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}
