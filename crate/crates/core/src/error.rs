use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::solver::DivergenceReport;

#[derive(Clone, Debug)]
pub enum Error {
    /// `1/h` (or `R/h`) is not an integer, or `h` is not positive.
    InvalidSpacing { h: f64, reason: &'static str },
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    KernelProfile { reason: &'static str },
    SpacingMismatch { grid_h: f64, kernel_h: f64 },
    GridMismatch,
    StencilOutOfDomain { node: isize, x: f64 },
    MissingOuterData { x: f64 },
    NonFinite { context: &'static str, x: f64 },
    OutsideTable { x: f64, lo: f64, hi: f64 },
    NotMonotone { inner: f64, outer: f64 },
    ThetaLambda { lambda: f64, min_f: f64 },
    NoThetaRadius { lambda: f64, kappa: f64, horizon: f64 },
    PsiConstruction { inequality: &'static str, detail: String },
    NotConverged { iterations: usize, residual: f64, spectral_radius: Option<f64> },
    Diverged(Box<DivergenceReport>),
    Precondition { reason: String },
    TransformDomain { x: f64, needed: f64, available: f64 },
    EnvelopeViolated { x: f64, value: f64, envelope: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidSpacing { h, reason } => write!(f, "invalid spacing h = {h}: {reason}"),
            Error::InvalidParameter { name, value, reason } => {
                write!(f, "invalid {name} = {value}: {reason}")
            }
            Error::KernelProfile { reason } => write!(f, "kernel profile rejected: {reason}"),
            Error::SpacingMismatch { grid_h, kernel_h } => {
                write!(f, "grid spacing {grid_h} differs from kernel spacing {kernel_h}")
            }
            Error::GridMismatch => write!(f, "grid functions live on different grids"),
            Error::StencilOutOfDomain { node, x } => write!(
                f,
                "stencil leaves the stored domain at node {node} (x = {x}) and no extension rule is set"
            ),
            Error::MissingOuterData { x } => write!(f, "outer data does not cover x = {x}"),
            Error::NonFinite { context, x } => write!(f, "non-finite value in {context} at x = {x}"),
            Error::OutsideTable { x, lo, hi } => {
                write!(f, "x = {x} lies outside the tabulated range [{lo}, {hi}]")
            }
            Error::NotMonotone { inner, outer } => write!(
                f,
                "profile is not nondecreasing in |x|: value at |x| = {outer} is below value at |x| = {inner}"
            ),
            Error::ThetaLambda { lambda, min_f } => {
                write!(f, "lambda = {lambda} exceeds min f = {min_f}")
            }
            Error::NoThetaRadius { lambda, kappa, horizon } => write!(
                f,
                "no radius up to {horizon} where f >= lambda + kappa^m (lambda = {lambda}, kappa = {kappa})"
            ),
            Error::PsiConstruction { inequality, detail } => {
                write!(f, "supersolution construction failed ({inequality}): {detail}")
            }
            Error::NotConverged { iterations, residual, spectral_radius } => {
                write!(f, "no convergence after {iterations} iterations (residual {residual:e}")?;
                if let Some(rho) = spectral_radius {
                    write!(f, ", spectral radius estimate {rho}")?;
                }
                write!(f, ")")
            }
            Error::Diverged(report) => write!(f, "solver diverged: {}", report.reason),
            Error::Precondition { reason } => write!(f, "precondition violated: {reason}"),
            Error::TransformDomain { x, needed, available } => write!(
                f,
                "transform at x = {x} reads |y| = {needed} beyond the stored radius {available}; use a larger R"
            ),
            Error::EnvelopeViolated { x, value, envelope } => {
                write!(f, "envelope violated at x = {x}: {value} < {envelope}")
            }
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
