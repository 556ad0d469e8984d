use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::real::Real;

/// Growth family of the source term. Every family except `Tabulated` is even in `x`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum SourceFamily {
    /// `c |x|^alpha`
    Power { c: f64, alpha: f64 },
    /// `c e^{alpha |x|}`
    ExpLinear { c: f64, alpha: f64 },
    /// `c exp(p^{|x|})`
    DoubleExp { c: f64, p: f64 },
    Constant { c0: f64 },
    /// Piecewise-linear through `(xs[k], values[k])`; `xs` strictly increasing.
    Tabulated { xs: Vec<f64>, values: Vec<f64> },
}

/// Source `f = family + shift` together with the gradient exponent `m > 2`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceSpec {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub family: SourceFamily,
    pub m: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub shift: f64,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, reason: "must be positive and finite" })
    }
}

impl SourceSpec {
    pub fn new(family: SourceFamily, m: f64) -> Result<SourceSpec> {
        let spec = SourceSpec { family, m, shift: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_shift(mut self, shift: f64) -> SourceSpec {
        self.shift = shift;
        self
    }

    pub fn power(c: f64, alpha: f64, m: f64) -> Result<SourceSpec> {
        SourceSpec::new(SourceFamily::Power { c, alpha }, m)
    }

    pub fn exp_linear(c: f64, alpha: f64, m: f64) -> Result<SourceSpec> {
        SourceSpec::new(SourceFamily::ExpLinear { c, alpha }, m)
    }

    pub fn double_exp(c: f64, p: f64, m: f64) -> Result<SourceSpec> {
        SourceSpec::new(SourceFamily::DoubleExp { c, p }, m)
    }

    pub fn constant(c0: f64, m: f64) -> Result<SourceSpec> {
        SourceSpec::new(SourceFamily::Constant { c0 }, m)
    }

    pub fn tabulated(xs: Vec<f64>, values: Vec<f64>, m: f64) -> Result<SourceSpec> {
        SourceSpec::new(SourceFamily::Tabulated { xs, values }, m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 2.0) || !self.m.is_finite() {
            return Err(Error::InvalidParameter { name: "m", value: self.m, reason: "gradient exponent must exceed 2" });
        }
        if !self.shift.is_finite() {
            return Err(Error::InvalidParameter { name: "shift", value: self.shift, reason: "must be finite" });
        }
        match &self.family {
            SourceFamily::Power { c, alpha } | SourceFamily::ExpLinear { c, alpha } => {
                positive("c", *c)?;
                positive("alpha", *alpha)
            }
            SourceFamily::DoubleExp { c, p } => {
                positive("c", *c)?;
                if *p > 1.0 && p.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter { name: "p", value: *p, reason: "must exceed 1" })
                }
            }
            SourceFamily::Constant { c0 } => {
                if c0.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter { name: "c0", value: *c0, reason: "must be finite" })
                }
            }
            SourceFamily::Tabulated { xs, values } => {
                if xs.len() < 2 || xs.len() != values.len() {
                    return Err(Error::InvalidParameter {
                        name: "tabulated",
                        value: xs.len() as f64,
                        reason: "need at least two points and matching lengths",
                    });
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) || values.iter().chain(xs).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "tabulated",
                        value: f64::NAN,
                        reason: "abscissae must be finite and strictly increasing",
                    });
                }
                Ok(())
            }
        }
    }

    /// `t * f`: scales the family and the shift.
    pub fn scaled(&self, t: f64) -> SourceSpec {
        let family = match &self.family {
            SourceFamily::Power { c, alpha } => SourceFamily::Power { c: c * t, alpha: *alpha },
            SourceFamily::ExpLinear { c, alpha } => SourceFamily::ExpLinear { c: c * t, alpha: *alpha },
            SourceFamily::DoubleExp { c, p } => SourceFamily::DoubleExp { c: c * t, p: *p },
            SourceFamily::Constant { c0 } => SourceFamily::Constant { c0: c0 * t },
            SourceFamily::Tabulated { xs, values } => SourceFamily::Tabulated {
                xs: xs.clone(),
                values: values.iter().map(|v| v * t).collect(),
            },
        };
        SourceSpec { family, m: self.m, shift: self.shift * t }
    }

    /// `m_* = m / (m - 1)`.
    pub fn m_star(&self) -> f64 {
        self.m / (self.m - 1.0)
    }

    pub fn has_closed_form_derivative(&self) -> bool {
        !matches!(self.family, SourceFamily::Tabulated { .. })
    }

    /// True for the families that depend on `|x|` only.
    pub fn is_radial(&self) -> bool {
        !matches!(self.family, SourceFamily::Tabulated { .. })
    }

    /// `f(x)`. May be `+inf` when the family overflows `f64`.
    pub fn value(&self, x: f64) -> Result<f64> {
        let r = math::abs(x);
        let g = match &self.family {
            SourceFamily::Power { c, alpha } => c * math::powf(r, *alpha),
            SourceFamily::ExpLinear { c, alpha } => c * math::exp(alpha * r),
            SourceFamily::DoubleExp { c, p } => c * math::exp(math::powf(*p, r)),
            SourceFamily::Constant { c0 } => *c0,
            SourceFamily::Tabulated { xs, values } => {
                let (k, t) = locate(xs, x)?;
                if t == 0.0 {
                    values[k]
                } else {
                    (1.0 - t) * values[k] + t * values[k + 1]
                }
            }
        };
        Ok(g + self.shift)
    }

    /// `f'(x)`. At `x = 0` the even families report 0.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let r = math::abs(x);
        let sgn = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        let d = match &self.family {
            SourceFamily::Power { c, alpha } => {
                if r == 0.0 {
                    0.0
                } else {
                    c * alpha * math::powf(r, alpha - 1.0)
                }
            }
            SourceFamily::ExpLinear { c, alpha } => c * alpha * math::exp(alpha * r),
            SourceFamily::DoubleExp { c, p } => {
                let q = math::powf(*p, r);
                c * math::exp(q) * q * math::ln(*p)
            }
            SourceFamily::Constant { .. } => 0.0,
            SourceFamily::Tabulated { xs, values } => {
                let (k, t) = locate(xs, x)?;
                let k = if t == 0.0 && k + 1 == xs.len() { k - 1 } else { k };
                return Ok((values[k + 1] - values[k]) / (xs[k + 1] - xs[k]));
            }
        };
        Ok(sgn * d)
    }

    /// `ln` of the family part without the shift; `NaN` where it is not positive.
    pub fn ln_family(&self, x: f64) -> f64 {
        let r = math::abs(x);
        match &self.family {
            SourceFamily::Power { c, alpha } => math::ln(*c) + alpha * math::ln(r),
            SourceFamily::ExpLinear { c, alpha } => math::ln(*c) + alpha * r,
            SourceFamily::DoubleExp { c, p } => math::ln(*c) + math::powf(*p, r),
            SourceFamily::Constant { c0 } => {
                if *c0 > 0.0 {
                    math::ln(*c0)
                } else {
                    f64::NAN
                }
            }
            SourceFamily::Tabulated { .. } => match self.value(x) {
                Ok(v) if v - self.shift > 0.0 => math::ln(v - self.shift),
                _ => f64::NAN,
            },
        }
    }

    /// `ln f(x)` computed without overflow; `NaN` where `f <= 0` or outside a table.
    pub fn ln_value(&self, x: f64) -> f64 {
        let lg = self.ln_family(x);
        if self.shift == 0.0 {
            return lg;
        }
        if self.shift > 0.0 {
            if lg.is_nan() {
                return match self.value(x) {
                    Ok(v) if v > 0.0 => math::ln(v),
                    _ => f64::NAN,
                };
            }
            return math::log_add_exp(lg, math::ln(self.shift));
        }
        match self.value(x) {
            Ok(v) if v.is_finite() && v > 0.0 => math::ln(v),
            Ok(v) if v == f64::INFINITY => lg,
            _ => f64::NAN,
        }
    }

    /// `f'(x) / f(x)`, stable where `f` overflows. Requires `f(x) > 0`.
    pub fn dlog(&self, x: f64) -> f64 {
        let r = math::abs(x);
        let sgn = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        let dln_family = match &self.family {
            SourceFamily::Power { alpha, .. } => {
                if r == 0.0 {
                    0.0
                } else {
                    alpha / r
                }
            }
            SourceFamily::ExpLinear { alpha, .. } => *alpha,
            SourceFamily::DoubleExp { p, .. } => math::ln(*p) * math::powf(*p, r),
            SourceFamily::Constant { .. } => 0.0,
            SourceFamily::Tabulated { .. } => {
                return match (self.derivative(x), self.value(x)) {
                    (Ok(d), Ok(v)) if v > 0.0 => d / v,
                    _ => f64::NAN,
                };
            }
        };
        if dln_family == 0.0 {
            return 0.0;
        }
        let share = math::exp(self.ln_family(x) - self.ln_value(x));
        sgn * share * dln_family
    }

    /// `f(x)` in an arbitrary scalar type; falls back to the log form when `f64` overflows.
    pub fn value_real<T: Real>(&self, x: f64) -> Result<T> {
        let v = self.value(x)?;
        if v.is_finite() {
            Ok(T::from_f64(v))
        } else {
            Ok(T::exp_of(self.ln_value(x)))
        }
    }

    /// Global minimum of `f` (closed form for the built-in families).
    pub fn min_value(&self) -> f64 {
        let base = match &self.family {
            SourceFamily::Power { .. } => 0.0,
            SourceFamily::ExpLinear { c, .. } => *c,
            SourceFamily::DoubleExp { c, .. } => c * core::f64::consts::E,
            SourceFamily::Constant { c0 } => *c0,
            SourceFamily::Tabulated { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        };
        base + self.shift
    }

    /// Domain of definition as `[lo, hi]`; unbounded for the closed-form families.
    pub fn domain(&self) -> (f64, f64) {
        match &self.family {
            SourceFamily::Tabulated { xs, .. } => (xs[0], xs[xs.len() - 1]),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

fn locate(xs: &[f64], x: f64) -> Result<(usize, f64)> {
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    if !(x >= lo && x <= hi) {
        return Err(Error::OutsideTable { x, lo, hi });
    }
    let k = xs.partition_point(|&t| t <= x).saturating_sub(1).min(xs.len() - 1);
    if k + 1 == xs.len() {
        return Ok((k, 0.0));
    }
    Ok((k, (x - xs[k]) / (xs[k + 1] - xs[k])))
}

/// `f(x)`.
pub fn eval_f(spec: &SourceSpec, x: f64) -> Result<f64> {
    spec.value(x)
}

/// `f'(x)`.
pub fn eval_df(spec: &SourceSpec, x: f64) -> Result<f64> {
    spec.derivative(x)
}
