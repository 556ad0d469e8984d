use alloc::vec;
use alloc::vec::Vec;

use super::barrier::{build_phi, h1_holds, h2_holds, Phi};
use super::source::{SourceFamily, SourceSpec};
use crate::math;

/// Printed with every report: sampling can refute but never prove an asymptotic statement.
pub const SAMPLING_LIMITATION: &str =
    "sampling-based: pass means no violation was found on the scanned range; closed-form verdicts override for built-in families";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Hypothesis {
    H0,
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
    H7,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 8] = [
        Hypothesis::H0,
        Hypothesis::H1,
        Hypothesis::H2,
        Hypothesis::H3,
        Hypothesis::H4,
        Hypothesis::H5,
        Hypothesis::H6,
        Hypothesis::H7,
    ];
}

/// A sample point and the two sides of the inequality evaluated there (often in log form).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Witness {
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "verdict", rename_all = "snake_case"))]
pub enum Verdict {
    Pass,
    Fail { witness: Witness },
    Inconclusive,
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GrowthClass {
    Slow,
    Fast,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HypothesisResult {
    pub hypothesis: Hypothesis,
    pub verdict: Verdict,
    pub numeric: Verdict,
    pub closed_form: Option<bool>,
    /// Radius beyond which every sample satisfied the inequality.
    pub onset: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Thresholds {
    pub eta0: Option<f64>,
    pub r_eta: Option<f64>,
    pub c_lower_eta: Option<f64>,
    pub c_upper_eta: Option<f64>,
    /// Largest scanned scale for which (H5) held.
    pub a0_h5: Option<f64>,
    /// Largest scanned scale for which (H6) held, and its onset radius.
    pub a0_h6: Option<f64>,
    pub r0_h6: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HypothesisReport {
    pub results: Vec<HypothesisResult>,
    pub growth: Option<GrowthClass>,
    pub thresholds: Thresholds,
    pub m_star: f64,
    pub r_max: f64,
    pub limitation: &'static str,
}

impl HypothesisReport {
    pub fn get(&self, h: Hypothesis) -> &HypothesisResult {
        &self.results[h as usize]
    }

    /// True when (H0), (H1), (H2) all pass.
    pub fn admissible(&self) -> bool {
        [Hypothesis::H0, Hypothesis::H1, Hypothesis::H2].iter().all(|&h| self.get(h).verdict.is_pass())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HypothesisScan {
    pub r_max: f64,
    pub samples: usize,
    pub etas: Vec<f64>,
    pub scales: Vec<f64>,
    /// Scale used for the (H7) ratio trend.
    pub h7_scale: f64,
}

impl Default for HypothesisScan {
    fn default() -> Self {
        HypothesisScan {
            r_max: 16.0,
            samples: 320,
            etas: vec![0.05, 0.1, 0.2, 0.3],
            scales: vec![1.02, 1.05, 1.1, 1.25, 1.5],
            h7_scale: 1.5,
        }
    }
}

struct Sampler<'a> {
    scan: &'a HypothesisScan,
}

impl Sampler<'_> {
    fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.scan.samples;
        (1..=n).map(move |k| self.scan.r_max * k as f64 / n as f64)
    }

    fn mid(&self) -> f64 {
        0.5 * self.scan.r_max
    }

    /// Pointwise inequality on both signs; pass when it holds from the first half of the scan on.
    fn pointwise(&self, check: impl Fn(f64) -> (bool, Witness)) -> (Verdict, Option<f64>, Witness) {
        let mut rows = Vec::with_capacity(self.scan.samples);
        for r in self.radii() {
            let (ok_p, w_p) = check(r);
            let (ok_n, w_n) = check(-r);
            let w = if !ok_n && ok_p { w_n } else { w_p };
            rows.push((r, ok_p && ok_n, w));
        }
        let probe = rows.last().map(|row| row.2).unwrap_or(Witness { x: 0.0, lhs: 0.0, rhs: 0.0 });
        let mut onset = None;
        for (r, ok, _) in rows.iter().rev() {
            if *ok {
                onset = Some(*r);
            } else {
                break;
            }
        }
        if let Some(r0) = onset {
            if r0 <= self.mid() {
                return (Verdict::Pass, onset, probe);
            }
        }
        let tail = (rows.len() / 10).max(1);
        let last = &rows[rows.len() - tail..];
        if last.iter().all(|row| !row.1) {
            let w = last[last.len() - 1].2;
            return (Verdict::Fail { witness: w }, onset, probe);
        }
        (Verdict::Inconclusive, onset, probe)
    }

    /// Trend of a scalar quantity `q(r)` (worst sign) between mid and end of the scan.
    fn trend(&self, q: impl Fn(f64) -> f64, worst_is_max: bool) -> Vec<(f64, f64)> {
        self.radii()
            .filter(|&r| r >= self.mid() - 1e-12)
            .map(|r| {
                let (a, b) = (q(r), q(-r));
                let v = if a.is_nan() || b.is_nan() {
                    f64::NAN
                } else if worst_is_max {
                    a.max(b)
                } else {
                    a.min(b)
                };
                (r, v)
            })
            .collect()
    }
}

/// `q` must tend to `-inf`: pass when decreasing over the tail and dropping by more than 0.1
/// (a power-law decay exponent of about 0.15 over the last doubling of the radius).
fn decreasing_to_minus_infinity(rows: &[(f64, f64)]) -> Verdict {
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    let witness = Witness { x: last.0, lhs: last.1, rhs: first.1 };
    if rows.iter().any(|r| r.1.is_nan()) {
        return Verdict::Fail { witness };
    }
    let monotone = rows.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12 * (1.0 + w[0].1.abs()));
    if monotone && last.1 < first.1 - 0.1 {
        Verdict::Pass
    } else if last.1 >= first.1 {
        Verdict::Fail { witness }
    } else {
        Verdict::Inconclusive
    }
}

fn combine(closed: Option<bool>, numeric: Verdict, probe: Witness) -> Verdict {
    match closed {
        Some(true) => Verdict::Pass,
        Some(false) => match numeric {
            Verdict::Fail { witness } => Verdict::Fail { witness },
            _ => Verdict::Fail { witness: probe },
        },
        None => numeric,
    }
}

/// Samples (H0)-(H7) on `(0, r_max]` in log form and adds closed-form verdicts for built-in families.
pub fn check_hypotheses(spec: &SourceSpec, scan: &HypothesisScan) -> HypothesisReport {
    let s = Sampler { scan };
    let m = spec.m;
    let m_star = spec.m_star();
    let phi = build_phi(spec);
    let lnf = |x: f64| spec.ln_value(x);
    let mut results = Vec::with_capacity(8);
    let mut thresholds = Thresholds::default();
    let family = &spec.family;

    // (H0): inf_{|x|=r} f grows without bound.
    let rows = s.trend(lnf, false);
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    let probe0 = Witness { x: last.0, lhs: last.1, rhs: first.1 };
    let h0_numeric = if rows.iter().any(|r| r.1.is_nan()) || last.1 <= first.1 {
        Verdict::Fail { witness: probe0 }
    } else if rows.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12 * (1.0 + w[0].1.abs())) {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    let h0_closed = match family {
        SourceFamily::Power { .. } | SourceFamily::ExpLinear { .. } | SourceFamily::DoubleExp { .. } => Some(true),
        SourceFamily::Constant { .. } => Some(false),
        SourceFamily::Tabulated { .. } => None,
    };
    results.push(HypothesisResult {
        hypothesis: Hypothesis::H0,
        verdict: combine(h0_closed, h0_numeric, probe0),
        numeric: h0_numeric,
        closed_form: h0_closed,
        onset: None,
    });

    // (H1): sup_{B_1(x)} |Phi'| <= |Phi'(x)|^m.
    let step = (scan.r_max / scan.samples as f64).min(0.05);
    let (h1_numeric, h1_onset, probe1) = s.pointwise(|x| {
        let ok = h1_holds(&phi, x, step);
        (ok, Witness { x, lhs: sup_ln_dphi(&phi, x, step), rhs: m * phi.ln_abs_derivative(x) })
    });
    let h1_closed = match family {
        SourceFamily::DoubleExp { p, .. } => Some(*p <= m),
        SourceFamily::Power { .. } | SourceFamily::ExpLinear { .. } => Some(true),
        SourceFamily::Constant { c0 } => Some(c0 + spec.shift >= 1.0),
        SourceFamily::Tabulated { .. } => None,
    };
    results.push(HypothesisResult {
        hypothesis: Hypothesis::H1,
        verdict: combine(h1_closed, h1_numeric, probe1),
        numeric: h1_numeric,
        closed_form: h1_closed,
        onset: h1_onset,
    });

    // (H2): x f'(x) >= -f(x), i.e. x (ln f)' >= -1.
    let (h2_numeric, h2_onset, probe2) =
        s.pointwise(|x| (h2_holds(spec, x), Witness { x, lhs: x * spec.dlog(x), rhs: -1.0 }));
    results.push(HypothesisResult {
        hypothesis: Hypothesis::H2,
        verdict: h2_numeric,
        numeric: h2_numeric,
        closed_form: None,
        onset: h2_onset,
    });
    let _ = probe2;

    // (H3): Phi = o(f), i.e. ln r + (1/m - 1) ln f -> -inf.
    let rows = s.trend(|x| math::ln(math::abs(x)) + (1.0 / m - 1.0) * lnf(x), true);
    let h3_numeric = decreasing_to_minus_infinity(&rows);
    let last = rows[rows.len() - 1];
    let probe3 = Witness { x: last.0, lhs: last.1, rhs: rows[0].1 };
    let h3_closed = match family {
        SourceFamily::Power { alpha, .. } => Some(*alpha > m_star),
        SourceFamily::ExpLinear { .. } | SourceFamily::DoubleExp { .. } => Some(true),
        SourceFamily::Constant { .. } => Some(false),
        SourceFamily::Tabulated { .. } => None,
    };
    results.push(HypothesisResult {
        hypothesis: Hypothesis::H3,
        verdict: combine(h3_closed, h3_numeric, probe3),
        numeric: h3_numeric,
        closed_form: h3_closed,
        onset: None,
    });

    // (H4): f(x + s|x|) comparable to f((1 -+ eta) x) with bounded constants.
    let mut h4_first: Option<Verdict> = None;
    let mut all_pass_so_far = true;
    for &eta in &scan.etas {
        let verdict = h4_for_eta(&s, spec, eta);
        if h4_first.is_none() {
            h4_first = Some(verdict.0);
        }
        if all_pass_so_far && verdict.0.is_pass() {
            thresholds.eta0 = Some(eta);
            thresholds.r_eta = Some(s.mid());
            thresholds.c_lower_eta = Some(math::exp(verdict.1));
            thresholds.c_upper_eta = Some(math::exp(verdict.2));
        } else {
            all_pass_so_far = false;
        }
    }
    let h4 = h4_first.unwrap_or(Verdict::Inconclusive);
    results.push(HypothesisResult { hypothesis: Hypothesis::H4, verdict: h4, numeric: h4, closed_form: None, onset: None });

    // (H5): sup_{|z|<=1} Phi(a(x+z)) << f(x).
    let mut h5_first = None;
    let mut all_pass_so_far = true;
    for &a in &scan.scales {
        let rows = s.trend(|x| sup_ln_phi_scaled(&phi, a, x) - lnf(x), true);
        let v = decreasing_to_minus_infinity(&rows);
        if h5_first.is_none() {
            h5_first = Some(v);
        }
        if all_pass_so_far && v.is_pass() {
            thresholds.a0_h5 = Some(a);
        } else {
            all_pass_so_far = false;
        }
    }
    let h5 = h5_first.unwrap_or(Verdict::Inconclusive);
    results.push(HypothesisResult { hypothesis: Hypothesis::H5, verdict: h5, numeric: h5, closed_form: None, onset: None });

    // (H6): f(ax) >= a f(x) beyond R_0.
    let mut h6_first = None;
    let mut h6_onset = None;
    let mut all_pass_so_far = true;
    for &a in &scan.scales {
        let (v, onset, _) = s.pointwise(|x| {
            let (l, r) = (lnf(a * x), math::ln(a) + lnf(x));
            (l >= r, Witness { x, lhs: l, rhs: r })
        });
        if h6_first.is_none() {
            h6_first = Some(v);
            h6_onset = onset;
        }
        if all_pass_so_far && v.is_pass() {
            thresholds.a0_h6 = Some(a);
            thresholds.r0_h6 = match (thresholds.r0_h6, onset) {
                (Some(p), Some(o)) => Some(p.max(o)),
                (p, o) => p.or(o),
            };
        } else {
            all_pass_so_far = false;
        }
    }
    let h6 = h6_first.unwrap_or(Verdict::Inconclusive);
    results.push(HypothesisResult { hypothesis: Hypothesis::H6, verdict: h6, numeric: h6, closed_form: None, onset: h6_onset });

    // (H7): limsup f(ax)/f(x) < inf (slow) versus unbounded ratio (fast).
    let a = scan.h7_scale;
    let rows = s.trend(|x| lnf(a * x) - lnf(x), true);
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    let probe7 = Witness { x: last.0, lhs: last.1, rhs: first.1 };
    let numeric_class = if rows.iter().any(|r| r.1.is_nan()) {
        None
    } else if last.1 > first.1 + 1.0 && rows.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12) {
        Some(GrowthClass::Fast)
    } else if math::abs(last.1 - first.1) <= 0.1 * (1.0 + math::abs(last.1)) {
        Some(GrowthClass::Slow)
    } else {
        None
    };
    let h7_numeric = match numeric_class {
        Some(GrowthClass::Slow) => Verdict::Pass,
        Some(GrowthClass::Fast) => Verdict::Fail { witness: probe7 },
        None => Verdict::Inconclusive,
    };
    let closed_class = match family {
        SourceFamily::Power { .. } | SourceFamily::Constant { .. } => Some(GrowthClass::Slow),
        SourceFamily::ExpLinear { .. } | SourceFamily::DoubleExp { .. } => Some(GrowthClass::Fast),
        SourceFamily::Tabulated { .. } => None,
    };
    let h7_closed = closed_class.map(|c| c == GrowthClass::Slow);
    results.push(HypothesisResult {
        hypothesis: Hypothesis::H7,
        verdict: combine(h7_closed, h7_numeric, probe7),
        numeric: h7_numeric,
        closed_form: h7_closed,
        onset: None,
    });

    HypothesisReport {
        results,
        growth: closed_class.or(numeric_class),
        thresholds,
        m_star,
        r_max: scan.r_max,
        limitation: SAMPLING_LIMITATION,
    }
}

fn sup_ln_dphi(phi: &Phi, x: f64, step: f64) -> f64 {
    let k = math::round(1.0 / step) as i64;
    (-k..=k).map(|j| phi.ln_abs_derivative(x + j as f64 * step)).fold(f64::NEG_INFINITY, f64::max)
}

fn sup_ln_phi_scaled(phi: &Phi, a: f64, x: f64) -> f64 {
    (-20..=20)
        .map(|j| phi.ln_value(a * (x + j as f64 / 20.0)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Returns the verdict for one `eta` and the log-constants `(ln c_lower, ln c_upper)` on the tail.
fn h4_for_eta(s: &Sampler<'_>, spec: &SourceSpec, eta: f64) -> (Verdict, f64, f64) {
    let lnf = |x: f64| spec.ln_value(x);
    let shifts: Vec<f64> = (-5..=5).map(|k| eta * k as f64 / 5.0).collect();
    let mut halves = [(f64::INFINITY, f64::NEG_INFINITY); 2];
    let mut worst = Witness { x: 0.0, lhs: 0.0, rhs: 0.0 };
    let quarter = 1.5 * s.mid();
    for r in s.radii().filter(|&r| r >= s.mid() - 1e-12) {
        let half = usize::from(r > quarter);
        for x in [r, -r] {
            let lower_ref = lnf((1.0 - eta) * x);
            let upper_ref = lnf((1.0 + eta) * x);
            for &sh in &shifts {
                for y in [x + sh * math::abs(x), x + sh * x] {
                    let v = lnf(y);
                    let lo = v - lower_ref;
                    let hi = v - upper_ref;
                    if lo.is_nan() || hi.is_nan() {
                        return (Verdict::Fail { witness: Witness { x, lhs: v, rhs: lower_ref } }, f64::NAN, f64::NAN);
                    }
                    if lo < halves[half].0 {
                        halves[half].0 = lo;
                        worst = Witness { x, lhs: v, rhs: lower_ref };
                    }
                    halves[half].1 = halves[half].1.max(hi);
                }
            }
        }
    }
    let ln_lower = halves[0].0.min(halves[1].0);
    let ln_upper = halves[0].1.max(halves[1].1);
    let drifting = halves[1].0 < halves[0].0 - 1.0 || halves[1].1 > halves[0].1 + 1.0;
    if drifting {
        (Verdict::Fail { witness: worst }, ln_lower, ln_upper)
    } else {
        (Verdict::Pass, ln_lower, ln_upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(spec: SourceSpec) -> HypothesisReport {
        check_hypotheses(&spec, &HypothesisScan::default())
    }

    #[test]
    fn double_exp_at_threshold_passes_h1() {
        let r = report(SourceSpec::double_exp(1.0, 3.0, 3.0).unwrap());
        assert!(r.get(Hypothesis::H1).verdict.is_pass());
        assert!(r.get(Hypothesis::H1).numeric.is_pass());
        assert_eq!(r.growth, Some(GrowthClass::Fast));
        let above = report(SourceSpec::double_exp(1.0, 4.5, 3.0).unwrap());
        assert!(above.get(Hypothesis::H1).verdict.is_fail());
        assert!(above.get(Hypothesis::H1).numeric.is_fail());
    }

    #[test]
    fn slow_power_fails_h3() {
        let r = report(SourceSpec::power(1.0, 1.5, 3.0).unwrap());
        assert!(r.get(Hypothesis::H3).verdict.is_fail());
        assert!(r.get(Hypothesis::H3).numeric.is_fail());
        let r = report(SourceSpec::power(1.0, 1.2, 3.0).unwrap());
        assert!(matches!(r.get(Hypothesis::H3).verdict, Verdict::Fail { .. }));
    }

    #[test]
    fn exp_linear_is_fast() {
        let r = report(SourceSpec::exp_linear(1.0, 1.0, 3.0).unwrap());
        assert_eq!(r.growth, Some(GrowthClass::Fast));
        assert!(r.get(Hypothesis::H7).numeric.is_fail());
        assert!(r.admissible());
    }

    #[test]
    fn quadratic_source_profile() {
        let r = report(SourceSpec::power(1.0, 2.0, 3.0).unwrap().with_shift(1.0));
        assert!(r.admissible());
        assert_eq!(r.growth, Some(GrowthClass::Slow));
        assert!(r.get(Hypothesis::H7).numeric.is_pass());
        assert!(r.get(Hypothesis::H4).verdict.is_pass());
        assert!(r.get(Hypothesis::H6).verdict.is_pass());
        assert!(r.get(Hypothesis::H5).verdict.is_pass());
        assert_eq!(r.thresholds.eta0, Some(0.3));
        assert!(r.thresholds.c_lower_eta.unwrap() > 0.0);
    }

    #[test]
    fn constant_fails_coercivity_with_witness() {
        let r = report(SourceSpec::constant(2.0, 3.0).unwrap());
        match r.get(Hypothesis::H0).verdict {
            Verdict::Fail { witness } => assert_eq!(witness.x, 16.0),
            v => panic!("{v:?}"),
        }
        assert_eq!(r.growth, Some(GrowthClass::Slow));
    }

    #[test]
    fn every_failure_has_a_witness() {
        for spec in [
            SourceSpec::constant(0.5, 3.0).unwrap(),
            SourceSpec::power(1.0, 0.5, 3.0).unwrap(),
            SourceSpec::double_exp(1.0, 5.0, 3.0).unwrap(),
        ] {
            let r = report(spec);
            for res in &r.results {
                if let Verdict::Fail { witness } = res.verdict {
                    assert!(witness.x.is_finite());
                }
            }
        }
    }
}
