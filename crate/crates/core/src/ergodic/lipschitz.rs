use super::{estimate_lambda_star, ErgodicConfig, ErgodicResult};
use crate::error::{Error, Result};
use crate::math;
use crate::problem::SourceSpec;

#[derive(Clone, Debug)]
pub struct LipschitzReport {
    /// Largest `c` with `f1, f2 >= c g` on the scan.
    pub c: f64,
    /// `sup |f1 - f2| / g` on the scan.
    pub dev_ratio: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub error1: f64,
    pub error2: f64,
    pub difference: f64,
    /// `dev/(c+dev) * max(lambda1, lambda2) + error1 + error2`.
    pub bound: f64,
    pub holds: bool,
    pub first: ErgodicResult,
    pub second: ErgodicResult,
}

/// Compares `|lambda(f2) - lambda(f1)|` against `dev/(c+dev) max(lambda(f1), lambda(f2))`.
pub fn lambda_lipschitz_experiment(
    f1: &SourceSpec,
    f2: &SourceSpec,
    g: &SourceSpec,
    cfg: &ErgodicConfig,
) -> Result<LipschitzReport> {
    let grid = cfg.solver.grid()?.with_radius(cfg.largest_radius())?;
    let mut c = f64::INFINITY;
    let mut dev = 0.0f64;
    for x in grid.nodes() {
        let (a, b, e) = (f1.value(x)?, f2.value(x)?, g.value(x)?);
        let low = a.min(b);
        if !(e > 0.0) || !(low > 0.0) {
            return Err(Error::EnvelopeViolated { x, value: low, envelope: e });
        }
        c = c.min(low / e);
        dev = dev.max(math::abs(a - b) / e);
    }
    if !dev.is_finite() || !c.is_finite() {
        return Err(Error::NonFinite { context: "envelope ratios", x: grid.radius() + 1.0 });
    }
    let first = estimate_lambda_star(f1, cfg)?;
    let second = estimate_lambda_star(f2, cfg)?;
    let (l1, l2) = (first.lambda_star.value, second.lambda_star.value);
    let (e1, e2) = (first.lambda_star.error, second.lambda_star.error);
    let difference = math::abs(l2 - l1);
    let bound = dev / (c + dev) * l1.max(l2) + e1 + e2;
    Ok(LipschitzReport {
        c,
        dev_ratio: dev,
        lambda1: l1,
        lambda2: l2,
        error1: e1,
        error2: e2,
        difference,
        bound,
        holds: difference <= bound,
        first,
        second,
    })
}
