//! Source families, the (H0)-(H7) checker, barrier constructions and the residual of `(EP)_lambda`.

mod barrier;
mod hypotheses;
mod residual;
mod source;

pub use barrier::{
    build_phi, build_psi, build_psi_beyond, build_theta, Barriers, Phi, Profile, Psi, PsiBar, ScanOptions, Theta,
};
pub use hypotheses::{
    check_hypotheses, GrowthClass, Hypothesis, HypothesisReport, HypothesisResult, HypothesisScan, Thresholds,
    Verdict, Witness, SAMPLING_LIMITATION,
};
pub use residual::{godunov_slope, residual_ep, GradientScheme, ResidualReport};
pub use source::{eval_df, eval_f, SourceFamily, SourceSpec};
