//! Command-line front end: `fit`, `check` and `simulate`.
//!
//! Results go to files or standard output as JSON/CSV; messages go to
//! standard error. Exit status is 0 on success, 1 on domain, usage or
//! configuration errors (and for `check` when an assumption fails), 2 on
//! malformed input files.

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::diagnostics::{
    self, alpha_grid_in_box, alpha_grid_with_margins, sample_gammas, Assumption, AssumptionReport, ErrorDistribution,
    Expectation, XDistribution,
};
use crate::error::{Error, Result};
use crate::loss::LossFunction;
use crate::model::{parse_model, ParameterPoint, SeparableModel};
use crate::simlab::{self, fmt17, CellFilter};
use crate::solver::{self, FitConfig};

use self::io::{atomic_write, json_number, json_numbers};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "sepm", version, about = "M-estimation for separable nonlinear regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV dataset (header x1,...,xq,y).
    Fit {
        #[arg(long)]
        model: String,
        #[arg(long)]
        loss: String,
        #[arg(long)]
        data: PathBuf,
        /// key = value file with fit.* settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the profiled objective over the α search box as CSV
        /// (single nonlinear parameter only).
        #[arg(long)]
        profile_out: Option<PathBuf>,
        #[arg(long, default_value_t = 201)]
        profile_points: usize,
        /// Write the fit JSON here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the sampled assumption checks for a model and loss.
    Check {
        #[arg(long)]
        model: String,
        #[arg(long)]
        loss: String,
        #[arg(long, default_value = "A,B,C,D,E,F,G")]
        assumptions: String,
        #[arg(long, default_value = "gaussian:0,0.1")]
        errdist: String,
        /// Predictor distribution; defaults depend on the model.
        #[arg(long)]
        x_dist: Option<String>,
        /// Comma-separated α₀; defaults depend on the model.
        #[arg(long)]
        theta0_alpha: Option<String>,
        #[arg(long)]
        theta0_beta: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment described by a key = value config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to cells `<n|*>x<rep|*>`; may be repeated.
        #[arg(long)]
        cells: Vec<String>,
        /// Fill the seconds column (makes the report nondeterministic).
        #[arg(long)]
        timing: bool,
    },
}

/// Parses `args` and runs the command, writing results to `stdout` and
/// messages to `stderr`. Returns the process exit status.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    match run(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "sepm: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Fit { model, loss, data, config, profile_out, profile_points, out } => {
            let model = parse_model(&model)?;
            let loss: LossFunction = loss.parse()?;
            let mut fit_config = match config {
                Some(p) => config::fit_config_from_str(&std::fs::read_to_string(p)?)?,
                None => FitConfig::default(),
            };
            if let Some(s) = config::seed_override()? {
                fit_config.seed = s;
            }
            let data = io::load_dataset(&data)?;
            let doc = run_fit(model.as_ref(), &loss, &data, &fit_config)?;
            emit(&doc, out, stdout)?;
            if let Some(path) = profile_out {
                let csv = profile_csv(model.as_ref(), &loss, &data, &fit_config, profile_points)?;
                atomic_write(&path, csv.as_bytes())?;
            }
            Ok(0)
        }
        Command::Check { model, loss, assumptions, errdist, x_dist, theta0_alpha, theta0_beta, seed, out } => {
            let spec = model.clone();
            let model = parse_model(&model)?;
            let loss: LossFunction = loss.parse()?;
            let errdist: ErrorDistribution = errdist.parse()?;
            let (mut theta0, mut xd) = check_defaults(model.as_ref(), &spec);
            if let Some(a) = theta0_alpha {
                theta0.alpha = parse_list(&a)?;
            }
            if let Some(b) = theta0_beta {
                theta0.beta = parse_list(&b)?;
            }
            if let Some(x) = x_dist {
                xd = x.parse()?;
            }
            let seed = config::seed_override()?.unwrap_or(seed);
            let list = assumptions.split(',').map(Assumption::parse).collect::<Result<Vec<_>>>()?;
            let setup = CheckSetup::new(model.as_ref(), theta0, xd, errdist, seed)?;
            let reports = list.iter().map(|a| setup.run(*a, &loss)).collect::<Result<Vec<_>>>()?;
            for r in &reports {
                let _ = writeln!(stderr, "{} {}: {}", r.assumption, if r.passed { "pass" } else { "FAIL" }, r.details);
            }
            let doc = check_document(&spec, &loss, &setup, &reports);
            emit(&doc, out, stdout)?;
            Ok(if reports.iter().all(|r| r.passed) { 0 } else { 1 })
        }
        Command::Simulate { config: path, out, cells, timing } => {
            let mut sim = config::sim_config_from_str(&std::fs::read_to_string(path)?)?;
            if let Some(s) = config::seed_override()? {
                sim.seed = s;
            }
            let filters = cells.iter().map(|c| CellFilter::parse(c)).collect::<Result<Vec<_>>>()?;
            let report = simlab::run_experiment(&sim, &filters)?;
            for r in report.rows.iter().filter(|r| r.flagged) {
                let _ = writeln!(stderr, "warning: {} at n={} had {} non-converged fits", r.loss, r.n, r.failures);
            }
            atomic_write(&out, report.to_csv(timing).as_bytes())?;
            Ok(0)
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::config(format!("invalid number {v:?} in {s:?}"))))
        .collect()
}

fn emit(doc: &Value, out: Option<PathBuf>, stdout: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(doc).expect("JSON values serialize") + "\n";
    match out {
        Some(path) => atomic_write(&path, text.as_bytes()),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

/// Fit JSON: `{schema_version, model, loss, alpha, beta, objective, converged, ...}`.
pub fn run_fit(model: &dyn SeparableModel, loss: &LossFunction, data: &solver::Dataset, config: &FitConfig) -> Result<Value> {
    let r = solver::fit(model, loss, data, config)?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "model": model.name(),
        "loss": loss.to_string(),
        "n": data.n(),
        "alpha": json_numbers(&r.theta_hat.alpha),
        "beta": json_numbers(&r.theta_hat.beta),
        "objective": json_number(r.objective),
        "converged": r.converged,
        "degenerate": r.degenerate,
        "iterations": r.iterations,
        "evaluations": r.evaluations,
    }))
}

/// Profiled objective over the model's α search box: columns
/// `alpha,objective,beta1..betap`.
pub fn profile_csv(
    model: &dyn SeparableModel,
    loss: &LossFunction,
    data: &solver::Dataset,
    config: &FitConfig,
    points: usize,
) -> Result<String> {
    if model.p1() != 1 {
        return Err(Error::usage(format!("profile output needs one nonlinear parameter; {} has {}", model.name(), model.p1())));
    }
    let mut header = vec!["alpha".to_string(), "objective".to_string()];
    header.extend((1..=model.p2()).map(|j| format!("beta{j}")));
    let mut s = header.join(",") + "\n";
    for alpha in alpha_grid_in_box(model, points) {
        let p = solver::profile_objective(model, loss, data, &alpha, config)?;
        let mut row = vec![fmt17(alpha[0]), fmt17(p.value)];
        row.extend(p.beta_star.iter().map(|b| fmt17(*b)));
        s += &row.join(",");
        s.push('\n');
    }
    Ok(s)
}

/// Default truth and predictor law for the built-in models.
pub fn check_defaults(model: &dyn SeparableModel, spec: &str) -> (ParameterPoint, XDistribution) {
    let p1 = model.p1();
    let wide = XDistribution::Uniform { lo: 0.1, hi: 10.0 };
    let narrow = XDistribution::Uniform { lo: 0.1, hi: 2.5 };
    let name = spec.split(':').next().unwrap_or("").trim();
    let (alpha, xd) = match name {
        "michaelis-menten" => (vec![2.0], wide),
        "logistic-growth" => (vec![0.5, 1.0], wide),
        "exp-decay" => ((0..p1).map(|j| -0.5 * 2f64.powi(j as i32)).collect(), narrow),
        "exp-growth" => ((0..p1).map(|j| 0.5 * 2f64.powi(j as i32)).collect(), narrow),
        _ => (vec![1.0; p1], wide),
    };
    (ParameterPoint::new(alpha, vec![1.0; model.p2()]), xd)
}

/// Sample sizes shared by all checks.
pub const CHECK_X_DRAWS: usize = 10_000;
pub const CHECK_ALPHA_DRAWS: usize = 1_000;
pub const CHECK_GAMMA_DRAWS: usize = 100;
const CHECK_BETA_DRAWS: usize = 10;
const ESCAPE_RADII: [f64; 10] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0];
const ESCAPE_MARGIN: f64 = 0.01;

/// Samples and grids used by the assumption checks.
pub struct CheckSetup<'a> {
    pub model: &'a dyn SeparableModel,
    pub theta0: ParameterPoint,
    pub x_dist: XDistribution,
    pub errdist: ErrorDistribution,
    pub seed: u64,
    pub x_sample: Vec<f64>,
    pub beta_samples: Vec<Vec<f64>>,
}

impl<'a> CheckSetup<'a> {
    pub fn new(
        model: &'a dyn SeparableModel,
        theta0: ParameterPoint,
        x_dist: XDistribution,
        errdist: ErrorDistribution,
        seed: u64,
    ) -> Result<Self> {
        model.check_theta(&theta0)?;
        x_dist.validate()?;
        errdist.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(simlab::derive_seed(seed, &[0x5]));
        let x_sample = x_dist.sample_n(CHECK_X_DRAWS, &mut rng);
        if let Some(x) = x_sample.iter().find(|x| !model.x_in_support(&[**x])) {
            return Err(Error::config(format!("x distribution {x_dist} draws x = {x} outside the model support")));
        }
        let norm = theta0.beta.iter().map(|b| b * b).sum::<f64>().sqrt();
        let beta_samples = sample_gammas(model.beta_cone(), model.p2(), CHECK_BETA_DRAWS, simlab::derive_seed(seed, &[0x6]))
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.iter().map(|v| v * norm * 0.5 * (i + 1) as f64).collect())
            .collect();
        Ok(CheckSetup { model, theta0, x_dist, errdist, seed, x_sample, beta_samples })
    }

    fn points_per_axis(&self) -> usize {
        (CHECK_ALPHA_DRAWS as f64).powf(1.0 / self.model.p1() as f64).ceil() as usize
    }

    /// α draws in the search box at distance at least `1e-3` from `α₀`.
    fn alpha_samples(&self) -> Vec<Vec<f64>> {
        solver::latin_hypercube_starts(&self.model.default_search_box(), CHECK_ALPHA_DRAWS, simlab::derive_seed(self.seed, &[0x7]))
            .into_iter()
            .filter(|a| {
                let d = a.iter().zip(&self.theta0.alpha).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                d >= 1e-3 && self.model.alpha_domain().contains(a)
            })
            .collect()
    }

    pub fn run(&self, assumption: Assumption, loss: &LossFunction) -> Result<AssumptionReport> {
        let m = self.model;
        match assumption {
            Assumption::A => diagnostics::check_condition_a(m, 1000, self.seed),
            Assumption::B => diagnostics::check_condition_b(
                m,
                loss,
                &self.errdist,
                &self.theta0,
                &self.beta_samples,
                &alpha_grid_with_margins(m, self.points_per_axis()),
                &self.x_sample,
                simlab::derive_seed(self.seed, &[0x8]),
            ),
            Assumption::C => {
                let t_grid: Vec<f64> = (-30..=30).map(|i| i as f64 * 0.1).collect();
                diagnostics::check_condition_c(loss, &self.errdist, &t_grid, expectation_for(&self.errdist, self.seed))
            }
            Assumption::D => diagnostics::check_identifiability_d(
                m,
                &self.x_sample,
                &self.theta0,
                &self.alpha_samples(),
                &self.beta_samples,
                1e-3,
            ),
            Assumption::E => {
                let lambda0 = diagnostics::estimate_lambda0(loss, &self.errdist, expectation_for(&self.errdist, self.seed))?;
                let gammas = sample_gammas(m.beta_cone(), m.p2(), CHECK_GAMMA_DRAWS, simlab::derive_seed(self.seed, &[0x9]));
                diagnostics::estimate_delta(
                    m,
                    loss,
                    lambda0,
                    &self.x_sample,
                    &alpha_grid_in_box(m, self.points_per_axis()),
                    &gammas,
                    diagnostics::ZERO_TOL,
                )
            }
            Assumption::F => diagnostics::check_escape_f(
                m,
                &self.theta0,
                &self.x_sample,
                &self.beta_samples,
                &ESCAPE_RADII,
                CHECK_ALPHA_DRAWS / ESCAPE_RADII.len(),
                ESCAPE_MARGIN,
                simlab::derive_seed(self.seed, &[0xA]),
            ),
            Assumption::G => {
                diagnostics::check_boundedness_g(m, &self.x_sample, &alpha_grid_with_margins(m, self.points_per_axis()))
            }
        }
    }
}

fn expectation_for(errdist: &ErrorDistribution, seed: u64) -> Expectation {
    if errdist.density().is_some() {
        Expectation::Quadrature
    } else {
        Expectation::MonteCarlo { n: 100_000, seed }
    }
}

fn check_document(spec: &str, loss: &LossFunction, setup: &CheckSetup, reports: &[AssumptionReport]) -> Value {
    let records: Vec<Value> = reports
        .iter()
        .map(|r| {
            let estimates: Map<String, Value> = r.estimates.iter().map(|(k, v)| (k.clone(), json_number(*v))).collect();
            json!({
                "assumption": r.assumption.to_string(),
                "passed": r.passed,
                "margin": json_number(r.margin),
                "details": r.details,
                "estimates": estimates,
            })
        })
        .collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "model": spec,
        "loss": loss.to_string(),
        "errdist": setup.errdist.to_string(),
        "x_dist": setup.x_dist.to_string(),
        "theta0": { "alpha": json_numbers(&setup.theta0.alpha), "beta": json_numbers(&setup.theta0.beta) },
        "seed": setup.seed,
        "reports": records,
    })
}
