//! One runner per command. Each returns a [`Report`]; nothing here touches the filesystem.

use std::collections::BTreeMap;

use nlergodic::ergodic::{certify_lower_bound, estimate_lambda_star, time_marching_slope, ErgodicConfig, SlopeOutcome};
use nlergodic::grid_kernel::{build_kernel, Extension, Grid, GridFunction, KernelProfile};
use nlergodic::problem::{
    build_psi, build_theta, check_hypotheses, residual_ep, GradientScheme, HypothesisScan, Profile, ScanOptions,
    SourceFamily, SourceSpec,
};
use nlergodic::regimes::{divergence_scan, Classification};
use nlergodic::verify::{comparison_check, strong_max_propagation};
use nlergodic::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// A solver diverged; recorded as a result.
    Diverged,
}

/// Profile table, one row per node.
#[derive(Clone, Debug, Default)]
pub struct ProfileTable {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
    pub residual: Vec<f64>,
}

impl ProfileTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,x,u,psi,theta,residual\n");
        for i in 0..self.x.len() {
            out.push_str(&format!(
                "{i},{},{},{},{},{}\n",
                self.x[i], self.u[i], self.psi[i], self.theta[i], self.residual[i]
            ));
        }
        out
    }
}

#[derive(Debug)]
pub struct Report {
    pub status: Status,
    /// Divergence was observed in at least one cell.
    pub divergent: bool,
    pub result: Value,
    /// Every constant fitted by the run.
    pub constants: BTreeMap<String, f64>,
    /// `(file name, csv text)`.
    pub tables: Vec<(String, String)>,
    pub notes: Vec<String>,
}

impl Report {
    fn new(result: Value) -> Report {
        Report {
            status: Status::Ok,
            divergent: false,
            result,
            constants: BTreeMap::new(),
            tables: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.to_string(), value);
    }
}

/// Numeric failures map to exit codes; divergence is data and handled by the caller.
fn lib(e: Error) -> CliError {
    match e {
        Error::NonFinite { .. } => CliError::NonFinite(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    match cfg.command {
        Command::Solve => {
            let mut ergodic = cfg.ergodic();
            ergodic.sigma_schedule = vec![cfg.numeric.sigma];
            ergodic.radius_step = 0.0;
            pipeline(cfg, &ergodic, Command::Solve)
        }
        Command::Ergodic => pipeline(cfg, &cfg.ergodic(), Command::Ergodic),
        Command::Regimes => regimes(cfg),
        Command::Hypotheses => hypotheses(cfg),
        Command::Verify => verify(cfg),
        Command::Slope => slope(cfg),
    }
}

fn diverged(report: &nlergodic::solver::DivergenceReport) -> Report {
    let mut r = Report::new(json!({ "divergence": report }));
    r.status = Status::Diverged;
    r.divergent = true;
    r.notes.push(format!("solver diverged: {}", report.reason));
    r
}

fn pipeline(cfg: &ExperimentConfig, ergodic: &ErgodicConfig, command: Command) -> Result<Report, CliError> {
    let res = match estimate_lambda_star(&cfg.source, ergodic) {
        Ok(r) => r,
        Err(Error::Diverged(d)) => return Ok(diverged(&d)),
        Err(e) => return Err(lib(e)),
    };
    // Needs R > 2; small grids simply omit it.
    let lower = res.w_core().ok().and_then(|core| certify_lower_bound(&core, &cfg.source, 0.1).ok());

    let grid = *res.v_profile.grid();
    let psi = res.psi_profile().map_err(lib)?;
    let theta = res.theta_profile().map_err(lib)?;
    let (u, name) = match command {
        Command::Solve => (&res.v_profile, "solve_profile.csv"),
        _ => (&res.w_profile, "ergodic_profile.csv"),
    };
    let table = ProfileTable {
        x: grid.nodes().collect(),
        u: u.values().to_vec(),
        psi: psi.values().to_vec(),
        theta: theta.values().to_vec(),
        residual: res.residual_profile.values().to_vec(),
    };

    let last = res.sigma_table.last().expect("schedule is nonempty");
    let mut result = json!({
        "sigma_table": res.sigma_table,
        "min_f": res.min_f,
        "bound_checks": {
            "sandwiches_hold": res.all_sandwiches_hold(),
            "lambda_star_above_min_f": res.lambda_star_above_min_f,
            "class_member": res.class.as_ref().map(|c| c.member),
        },
        "class": res.class,
        "barriers": res.barriers,
        "theta": res.theta,
        "hypotheses": res.hypotheses,
        "lower_bound": lower,
        "v_at_zero": res.v_profile.at_zero(),
    });
    if command == Command::Ergodic {
        result["lambda_star"] = json!(res.lambda_star);
    } else {
        result["lambda_sigma"] = json!(last.lambda_sigma);
    }

    let mut r = Report::new(result);
    r.tables.push((name.to_string(), table.to_csv()));
    if command == Command::Ergodic {
        r.constant("lambda_star", res.lambda_star.value);
        r.constant("lambda_star_error", res.lambda_star.error);
    } else {
        r.constant("lambda_sigma", last.lambda_sigma);
    }
    r.constant("R_star", res.theta.r_star);
    r.constant("c1", res.c1);
    r.constant("c2", res.c2);
    r.constant("M", res.big_m);
    r.constant("mu", res.mu_growth);
    r.constant("mu0", res.mu0);
    r.constant("min_f", res.min_f);
    if let Some(b) = &res.barriers {
        r.constant("c_star", b.c_star);
        r.constant("R_upper", b.r_upper);
        r.constant("c_lambda", b.c_lambda);
    }
    if let Some(c) = lower.as_ref().and_then(|l| l.c_eta) {
        r.constant("C_eta", c);
    }
    Ok(r)
}

fn regimes(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let m = cfg.source.m;
    let specs: Vec<(Option<f64>, SourceSpec)> = match (&cfg.regimes.sweep, &cfg.source.family) {
        (Some(ratios), SourceFamily::DoubleExp { c, .. }) => ratios
            .iter()
            .map(|&q| SourceSpec::double_exp(*c, q * m, m).map(|s| (Some(q), s.with_shift(cfg.source.shift))))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("regimes.sweep: {e}")))?,
        (Some(_), _) => return Err(CliError::Config("regimes.sweep: needs a double_exp source".into())),
        (None, _) => vec![(None, cfg.source.clone())],
    };
    let solver = cfg.solver();
    let mut rows = Vec::new();
    let mut trace_csv = String::from("ratio,p,radius,sup_w,log10_sup_w,log10_lambda_sigma,iterations,residual\n");
    let mut r = Report::new(Value::Null);
    for (ratio, spec) in specs {
        let v = divergence_scan(&spec, &cfg.r_list, cfg.regimes.sigma, &solver, &cfg.regimes.thresholds).map_err(lib)?;
        let p = match spec.family {
            SourceFamily::DoubleExp { p, .. } => Some(p),
            _ => None,
        };
        let tag = ratio.map_or("source".to_string(), |q| format!("{q}"));
        for e in &v.trace {
            trace_csv.push_str(&format!(
                "{tag},{},{},{},{},{},{},{}\n",
                p.map_or(String::new(), |p| p.to_string()),
                e.radius,
                e.sup_w,
                e.log10_sup_w,
                e.log10_lambda_sigma,
                e.iterations,
                e.residual
            ));
        }
        if let Some(w) = &v.analytic {
            r.constant(&format!("gamma[{tag}]"), w.gamma);
            r.constant(&format!("delta[{tag}]"), w.delta);
        }
        if v.classification == Classification::Divergent {
            r.divergent = true;
        }
        r.notes.push(format!("cell {tag}: {:?} ({})", v.classification, v.note));
        rows.push(json!({ "ratio": ratio, "p": p, "verdict": v }));
    }
    r.result = json!({ "rows": rows, "radii": cfg.r_list, "sigma": cfg.regimes.sigma });
    r.tables.push(("regimes_trace.csv".into(), trace_csv));
    Ok(r)
}

fn hypotheses(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let report = check_hypotheses(&cfg.source, &HypothesisScan::default());
    let mut r = Report::new(json!({ "admissible": report.admissible(), "report": report }));
    r.constant("m_star", report.m_star);
    for h in &report.results {
        if let Some(onset) = h.onset {
            r.constant(&format!("onset[{:?}]", h.hypothesis), onset);
        }
    }
    Ok(r)
}

fn slope(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let out = time_marching_slope(&cfg.source, &cfg.solver(), cfg.slope.horizon, cfg.slope.dt).map_err(lib)?;
    match out {
        SlopeOutcome::Converged(s) => {
            let mut r = Report::new(json!({ "slope": s }));
            r.constant("slope", s.slope);
            r.constant("slope_error", s.error);
            Ok(r)
        }
        SlopeOutcome::Diverged(d) => Ok(diverged(&d)),
    }
}

/// Smooth random field `sum_k a_k sin(b_k x + c_k)` on `grid`.
fn random_field(rng: &mut ChaCha8Rng, grid: Grid) -> Result<GridFunction, Error> {
    let terms: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.1..3.0), rng.random_range(0.0..6.3)))
        .collect();
    let values = grid.nodes().map(|x| terms.iter().map(|(a, b, c)| a * (b * x + c).sin()).sum()).collect();
    GridFunction::new(grid, values)
}

fn verify(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let solver = cfg.solver();
    let grid = solver.grid().map_err(lib)?;
    let kernel = solver.kernel().map_err(lib)?;
    let spec = &cfg.source;
    let mut r = Report::new(Value::Null);

    let barrier = if matches!(spec.family, SourceFamily::Constant { .. }) {
        None
    } else {
        let lambda = spec.min_value();
        let scan = ScanOptions::new(grid.h(), cfg.horizon.max(grid.radius() + 2.0)).map_err(lib)?;
        let theta = build_theta(spec, lambda, 1.0, &scan).map_err(lib)?.sample(grid).map_err(lib)?;
        let (psi, b) = build_psi(spec, lambda, &scan).map_err(lib)?;
        let psi = psi.times(b.c_lambda).sample(grid).map_err(lib)?;
        let rt = residual_ep(lambda, &theta, spec, &kernel, GradientScheme::Godunov).map_err(lib)?.residual;
        // Psi has a convex corner at the origin; its certificate covers |x| >= h.
        let h = grid.h();
        let rp = residual_ep(lambda, &psi, spec, &kernel, GradientScheme::Godunov)
            .map_err(lib)?
            .residual
            .map(|x, v| if x.abs() < h / 2.0 { 0.0 } else { v })
            .map_err(lib)?;
        let rep = comparison_check(&theta, &psi, Some(&rt), Some(&rp), true, spec.m, cfg.verify.barrier_tol)
            .map_err(lib)?;
        r.constant("comparison_C", rep.constant);
        Some(rep)
    };

    let constant = GridFunction::constant(grid, 7.0).map_err(lib)?;
    let propagation = strong_max_propagation(&constant, &kernel, None, 1e-12).map_err(lib)?;

    let control_grid = Grid::new(0.5, 0.05).map_err(lib)?;
    let holed = build_kernel(KernelProfile::Biweight, 0.05).map_err(lib)?.with_zeroed_annulus(0.05, 0.55).map_err(lib)?;
    let field = GridFunction::from_fn(control_grid, |x: f64| {
        let a = x.abs();
        if a < 1e-9 || (a > 0.6 - 1e-9 && a < 1.0 - 1e-9) {
            0.0
        } else {
            -1.0
        }
    })
    .map_err(lib)?
    .with_extension(Extension::Constant);
    let control = strong_max_propagation(&field, &holed, None, 1e-12).map_err(lib)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zero = GridFunction::constant(grid, 0.0).map_err(lib)?;
    let (mut reflexive, mut shifted) = (0usize, 0usize);
    for _ in 0..cfg.verify.samples {
        let u = random_field(&mut rng, grid).map_err(lib)?;
        let up = u.map(|_, v| v + 0.5).map_err(lib)?;
        let same = comparison_check(&u, &u, Some(&zero), Some(&zero), true, spec.m, 1e-10).map_err(lib)?;
        reflexive += usize::from(same.ordered && same.worst_violation == 0.0);
        let lifted = comparison_check(&u, &up, Some(&zero), Some(&zero), true, spec.m, 1e-10).map_err(lib)?;
        shifted += usize::from(lifted.ordered);
    }

    let passed = barrier.as_ref().is_none_or(|b| b.ordered)
        && propagation.full_grid
        && !control.full_grid
        && reflexive == cfg.verify.samples
        && shifted == cfg.verify.samples;
    r.result = json!({
        "passed": passed,
        "barrier_comparison": barrier,
        "constant_propagation": propagation,
        "negative_control": control,
        "random": { "samples": cfg.verify.samples, "reflexive": reflexive, "shifted": shifted },
    });
    Ok(r)
}
