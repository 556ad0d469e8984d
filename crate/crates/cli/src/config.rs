//! Experiment configuration file.

use std::path::{Path, PathBuf};

use nlergodic::ergodic::{default_schedule, ErgodicConfig};
use nlergodic::problem::SourceSpec;
use nlergodic::regimes::ScanThresholds;
use nlergodic::solver::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Ergodic,
    Regimes,
    Hypotheses,
    Verify,
    Slope,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Ergodic => "ergodic",
            Command::Regimes => "regimes",
            Command::Hypotheses => "hypotheses",
            Command::Verify => "verify",
            Command::Slope => "slope",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeOptions {
    pub sigma: f64,
    /// Ratios `p / m` for a double-exponential source; each gives one verdict row.
    pub sweep: Option<Vec<f64>>,
    pub thresholds: ScanThresholds,
}

impl Default for RegimeOptions {
    fn default() -> Self {
        RegimeOptions { sigma: 0.05, sweep: None, thresholds: ScanThresholds::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlopeOptions {
    pub horizon: f64,
    pub dt: f64,
}

impl Default for SlopeOptions {
    fn default() -> Self {
        SlopeOptions { horizon: 80.0, dt: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Certificate tolerance for the barrier pair.
    pub barrier_tol: f64,
    /// Randomized reflexivity and shift checks.
    pub samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { barrier_tol: 0.2, samples: 16 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub json: Option<PathBuf>,
    pub csv_dir: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub source: SourceSpec,
    /// `m` is taken from `source`.
    #[serde(default)]
    pub numeric: SolverConfig,
    #[serde(default = "default_schedule")]
    pub sigma_schedule: Vec<f64>,
    #[serde(default = "default_radius_step")]
    pub radius_step: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_true")]
    pub check_admissibility: bool,
    #[serde(rename = "R_list", default = "default_radii")]
    pub r_list: Vec<f64>,
    #[serde(default)]
    pub regimes: RegimeOptions,
    #[serde(default)]
    pub slope: SlopeOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_radius_step() -> f64 {
    2.0
}

fn default_horizon() -> f64 {
    32.0
}

fn default_true() -> bool {
    true
}

fn default_radii() -> Vec<f64> {
    vec![4.0, 6.0, 8.0]
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub h: Option<f64>,
    pub radius: Option<f64>,
    pub csv_dir: Option<PathBuf>,
    pub json_out: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::Config(inner.to_string())
            } else {
                CliError::Config(format!("{path}: {inner}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(c) = o.command {
            self.command = c;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(h) = o.h {
            self.numeric.h = h;
        }
        if let Some(r) = o.radius {
            self.numeric.radius = r;
        }
        if o.csv_dir.is_some() {
            self.outputs.csv_dir.clone_from(&o.csv_dir);
        }
        if o.json_out.is_some() {
            self.outputs.json.clone_from(&o.json_out);
        }
        if o.log.is_some() {
            self.outputs.log.clone_from(&o.log);
        }
    }

    /// Solver settings with the source exponent.
    pub fn solver(&self) -> SolverConfig {
        SolverConfig { m: self.source.m, ..self.numeric.clone() }
    }

    pub fn ergodic(&self) -> ErgodicConfig {
        ErgodicConfig {
            solver: self.solver(),
            sigma_schedule: self.sigma_schedule.clone(),
            radius_step: self.radius_step,
            horizon: self.horizon,
            check_admissibility: self.check_admissibility,
        }
    }

    /// Checks every field the selected command reads; errors name the field path.
    pub fn validate(&self) -> Result<(), CliError> {
        let field = |path: &str, e: nlergodic::Error| CliError::Config(format!("{path}: {e}"));
        self.source.validate().map_err(|e| field("source", e))?;
        let solver = SolverConfig { sigma: self.numeric.sigma.max(0.0), ..self.solver() };
        solver.validate().map_err(|e| field("numeric", e))?;
        match self.command {
            Command::Solve => {
                if !(self.numeric.sigma > 0.0) {
                    return Err(CliError::Config("numeric.sigma: solve needs a positive discount".into()));
                }
            }
            Command::Ergodic => self.ergodic().validate().map_err(|e| field("sigma_schedule", e))?,
            Command::Regimes => {
                if self.r_list.len() < 3 || self.r_list.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(CliError::Config("R_list: need at least three increasing radii".into()));
                }
                if !(self.regimes.sigma > 0.0) {
                    return Err(CliError::Config("regimes.sigma: must be positive".into()));
                }
                if let Some(sweep) = &self.regimes.sweep {
                    if sweep.iter().any(|r| !(r * self.source.m > 1.0)) {
                        return Err(CliError::Config("regimes.sweep: every ratio must give p = ratio * m > 1".into()));
                    }
                }
            }
            Command::Slope => {
                if !(self.slope.dt > 0.0 && self.slope.horizon >= 4.0 * self.slope.dt) {
                    return Err(CliError::Config("slope: need dt > 0 and horizon >= 4 dt".into()));
                }
            }
            Command::Verify => {
                if !(self.verify.barrier_tol >= 0.0) {
                    return Err(CliError::Config("verify.barrier_tol: must be nonnegative".into()));
                }
            }
            Command::Hypotheses => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nlergodic::problem::SourceFamily;
    use proptest::prelude::*;

    fn family() -> impl Strategy<Value = SourceFamily> {
        prop_oneof![
            (0.1f64..10.0, 0.5f64..4.0).prop_map(|(c, alpha)| SourceFamily::Power { c, alpha }),
            (0.1f64..10.0, 0.1f64..3.0).prop_map(|(c, alpha)| SourceFamily::ExpLinear { c, alpha }),
            (0.1f64..10.0, 1.1f64..6.0).prop_map(|(c, p)| SourceFamily::DoubleExp { c, p }),
            (-5.0f64..5.0).prop_map(|c0| SourceFamily::Constant { c0 }),
        ]
    }

    fn command() -> impl Strategy<Value = Command> {
        prop_oneof![
            Just(Command::Solve),
            Just(Command::Ergodic),
            Just(Command::Regimes),
            Just(Command::Hypotheses),
            Just(Command::Verify),
            Just(Command::Slope),
        ]
    }

    proptest! {
        #[test]
        fn parse_serialize_parse_is_identity(
            command in command(),
            family in family(),
            m in 2.1f64..6.0,
            shift in -2.0f64..2.0,
            cells in 5usize..200,
            tol in 1e-14f64..1e-4,
            schedule in proptest::collection::vec(1e-4f64..1.0, 1..8),
            radii in proptest::collection::vec(1.0f64..20.0, 3..5),
            seed in any::<u64>(),
            sweep in proptest::option::of(proptest::collection::vec(0.1f64..3.0, 0..4)),
        ) {
            let mut cfg = ExperimentConfig::parse(r#"{"command":"ergodic","source":{"family":"constant","c0":1,"m":3}}"#).unwrap();
            cfg.command = command;
            cfg.source = SourceSpec { family, m, shift };
            cfg.numeric.h = 1.0 / cells as f64;
            cfg.numeric.tol = tol;
            cfg.sigma_schedule = schedule;
            cfg.r_list = radii;
            cfg.seed = seed;
            cfg.regimes.sweep = sweep;
            let once = ExperimentConfig::parse(&cfg.to_json()).unwrap();
            prop_assert_eq!(&once, &cfg);
            prop_assert_eq!(once.to_json(), cfg.to_json());
        }
    }

    #[test]
    fn defaults_fill_optional_sections() {
        let cfg = ExperimentConfig::parse(r#"{"command":"verify","source":{"family":"power","c":1,"alpha":2,"m":3}}"#).unwrap();
        assert_eq!(cfg.r_list, vec![4.0, 6.0, 8.0]);
        assert_eq!(cfg.sigma_schedule.len(), 7);
        assert_eq!(cfg.regimes.sigma, 0.05);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn errors_name_the_field() {
        let missing = ExperimentConfig::parse(r#"{"command":"ergodic","source":{"family":"power","c":1,"alpha":2}}"#);
        assert!(matches!(&missing, Err(CliError::Config(m)) if m.contains("source") && m.contains("`m`")), "{missing:?}");
        let unknown = ExperimentConfig::parse(r#"{"command":"ergodic","source":{"family":"constant","c0":1,"m":3},"extra":1}"#);
        assert!(matches!(&unknown, Err(CliError::Config(m)) if m.contains("extra")), "{unknown:?}");
        let mut cfg = ExperimentConfig::parse(r#"{"command":"ergodic","source":{"family":"constant","c0":1,"m":3}}"#).unwrap();
        cfg.numeric.h = 0.03;
        assert!(matches!(cfg.validate(), Err(CliError::Config(m)) if m.starts_with("numeric")));
        cfg.numeric.h = 0.05;
        cfg.sigma_schedule = vec![0.1, 0.2];
        assert!(matches!(cfg.validate(), Err(CliError::Config(m)) if m.starts_with("sigma_schedule")));
    }

    #[test]
    fn flags_override_file() {
        let mut cfg = ExperimentConfig::parse(r#"{"command":"ergodic","source":{"family":"constant","c0":1,"m":3},"seed":3}"#).unwrap();
        cfg.apply(&Overrides { h: Some(0.005), seed: Some(9), command: Some(Command::Verify), ..Overrides::default() });
        assert_eq!(cfg.numeric.h, 0.005);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.command, Command::Verify);
        assert_eq!(cfg.numeric.radius, 8.0);
    }
}
