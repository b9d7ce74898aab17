//! Seeded Monte Carlo experiments: consistency of the M-estimate as `n`
//! grows, boundedness of `‖β̂ₙ‖`, and robustness under contaminated errors.
//!
//! Every replication cell `(loss, n, rep)` draws from its own derived seeds,
//! so cells can be recomputed in isolation and scheduled in any order.
//! The dataset seed depends on `(n, rep)` only, which makes all losses in a
//! run see the same data.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diagnostics::{ErrorDistribution, XDistribution};
use crate::error::{Error, Result};
use crate::loss::{LossFunction, LossKind};
use crate::model::{parse_model, ParameterPoint, SeparableModel};
use crate::solver::{fit, Dataset, FitConfig};

/// Cells with a larger share of non-converged fits are flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: String,
    pub theta0: ParameterPoint,
    pub x_dist: XDistribution,
    pub errdist: ErrorDistribution,
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub losses: Vec<LossFunction>,
    pub seed: u64,
    pub fit: FitConfig,
}

impl SimConfig {
    /// Michaelis–Menten with `θ₀ = (2, 1)`, `x ~ U(0.1, 10)`, `N(0, 0.1²)`
    /// errors, `n ∈ {50, 200, 800, 3200}`, 200 replications and the three
    /// built-in losses at their default tuning constants.
    pub fn michaelis_menten_default() -> Self {
        SimConfig {
            model: "michaelis-menten".into(),
            theta0: ParameterPoint::new(vec![2.0], vec![1.0]),
            x_dist: XDistribution::Uniform { lo: 0.1, hi: 10.0 },
            errdist: ErrorDistribution::Gaussian { mean: 0.0, sd: 0.1 },
            n_list: vec![50, 200, 800, 3200],
            reps: 200,
            losses: vec![
                LossFunction::square(),
                LossFunction::huber(1.345).expect("valid"),
                LossFunction::bisquare(4.685).expect("valid"),
            ],
            seed: 20_240_601,
            fit: FitConfig::default(),
        }
    }

    pub fn build_model(&self) -> Result<Box<dyn SeparableModel>> {
        parse_model(&self.model)
    }

    pub fn validate(&self) -> Result<Box<dyn SeparableModel>> {
        let model = self.build_model()?;
        if self.n_list.is_empty() || self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("n_list must be nonempty, positive and strictly increasing"));
        }
        if self.reps == 0 {
            return Err(Error::config("reps must be at least 1"));
        }
        if self.losses.is_empty() {
            return Err(Error::config("at least one loss is required"));
        }
        model.check_theta(&self.theta0).map_err(|e| Error::config(format!("theta0: {e}")))?;
        if self.theta0.beta.iter().any(|b| *b <= 0.0) {
            return Err(Error::config("theta0 must have strictly positive beta entries"));
        }
        self.x_dist.validate()?;
        self.errdist.validate()?;
        check_x_support(model.as_ref(), &self.x_dist)?;
        self.fit.validate()?;
        Ok(model)
    }
}

fn check_x_support<M: SeparableModel + ?Sized>(model: &M, x_dist: &XDistribution) -> Result<()> {
    if model.q() != 1 {
        return Err(Error::config("simulation supports scalar predictors only"));
    }
    let mut extremes = vec![x_dist.lower_support()];
    if let XDistribution::Uniform { hi, .. } = x_dist {
        extremes.push(*hi);
    }
    if let XDistribution::Discrete { points, .. } = x_dist {
        extremes.extend(points.iter().copied());
    }
    for x in extremes {
        if !model.x_in_support(&[x]) {
            return Err(Error::config(format!(
                "predictor distribution {x_dist} reaches x = {x}, outside the support of {}",
                model.name()
            )));
        }
    }
    Ok(())
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed derived from a master seed and a tuple of labels.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(master), |acc, p| mix(acc ^ mix(*p)))
}

const DATA_STREAM: u64 = 0xD474;
const FIT_STREAM: u64 = 0xF17;

pub fn data_seed(master: u64, n: usize, rep: usize) -> u64 {
    derive_seed(master, &[DATA_STREAM, n as u64, rep as u64])
}

pub fn fit_seed(master: u64, loss_index: usize, n: usize, rep: usize) -> u64 {
    derive_seed(master, &[FIT_STREAM, loss_index as u64, n as u64, rep as u64])
}

/// Draws `(x_i, y_i)` with `y_i = β₀′h(x_i, α₀) + e_i`. Predictors and errors
/// come from separate streams of `seed`; `θ₀` is canonicalized first so that
/// relabelings of the truth give bit-identical data.
pub fn generate_dataset<M: SeparableModel + ?Sized>(
    model: &M,
    theta0: &ParameterPoint,
    n: usize,
    x_dist: &XDistribution,
    errdist: &ErrorDistribution,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::usage("n must be at least 1"));
    }
    model.check_theta(theta0)?;
    x_dist.validate()?;
    errdist.validate()?;
    check_x_support(model, x_dist)?;
    let mut truth = theta0.clone();
    model.canonicalize(&mut truth);
    let mut x_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let mut e_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[2]));
    let xs = x_dist.sample_n(n, &mut x_rng);
    let ys = xs
        .iter()
        .map(|x| Ok(model.predict(&[*x], &truth)? + errdist.sample(&mut e_rng)))
        .collect::<Result<Vec<f64>>>()?;
    Dataset::from_scalar(xs, ys)
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub loss_index: usize,
    pub n: usize,
    pub rep: usize,
    pub theta_hat: ParameterPoint,
    /// `‖θ̂ − θ₀‖₂` on canonicalized parameters.
    pub err: f64,
    pub alpha_err: f64,
    pub beta_err: f64,
    pub beta_norm: f64,
    pub objective: f64,
    pub converged: bool,
    pub seconds: f64,
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Runs one `(loss, n, rep)` cell from its derived seeds.
pub fn run_cell(config: &SimConfig, model: &dyn SeparableModel, loss_index: usize, n: usize, rep: usize) -> Result<CellRecord> {
    let loss = config
        .losses
        .get(loss_index)
        .ok_or_else(|| Error::usage(format!("loss index {loss_index} out of range")))?;
    let started = Instant::now();
    let data = generate_dataset(model, &config.theta0, n, &config.x_dist, &config.errdist, data_seed(config.seed, n, rep))?;
    let fit_config = FitConfig { seed: fit_seed(config.seed, loss_index, n, rep), ..config.fit.clone() };
    let result = fit(model, loss, &data, &fit_config)?;

    let mut truth = config.theta0.clone();
    model.canonicalize(&mut truth);
    let th = &result.theta_hat;
    let alpha_err = l2(&th.alpha, &truth.alpha);
    let beta_err = l2(&th.beta, &truth.beta);
    Ok(CellRecord {
        loss_index,
        n,
        rep,
        err: (alpha_err * alpha_err + beta_err * beta_err).sqrt(),
        alpha_err,
        beta_err,
        beta_norm: th.beta.iter().map(|b| b * b).sum::<f64>().sqrt(),
        objective: result.objective,
        converged: result.converged,
        theta_hat: result.theta_hat,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Summary for one `(loss, n)` pair. Quantiles use converged fits only.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub loss: String,
    pub n: usize,
    pub rep_count: usize,
    pub median_err: f64,
    pub q1: f64,
    pub q3: f64,
    pub median_alpha_err: f64,
    pub median_beta_err: f64,
    pub median_beta_norm: f64,
    /// Largest `‖β̂‖` over all replications, converged or not.
    pub max_beta_norm: f64,
    pub failures: usize,
    pub flagged: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub rows: Vec<SimRow>,
    pub cells: Vec<CellRecord>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub const CSV_HEADER: &str = "loss,n,rep_count,median_err,q1,q3,median_beta_norm,failures,seconds";

/// Shortest text that reads back as the same `f64` at 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl SimReport {
    pub fn row(&self, loss: &str, n: usize) -> Option<&SimRow> {
        self.rows.iter().find(|r| r.loss == loss && r.n == n)
    }

    /// CSV rendering. Without timing the `seconds` column is left empty so
    /// the output is a pure function of the configuration.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let secs = if include_timing { fmt17(r.seconds) } else { String::new() };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.loss,
                r.n,
                r.rep_count,
                fmt17(r.median_err),
                fmt17(r.q1),
                fmt17(r.q3),
                fmt17(r.median_beta_norm),
                r.failures,
                secs
            );
        }
        out
    }
}

/// Restricts which cells run: `n` and/or `rep` may be pinned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellFilter {
    pub n: Option<usize>,
    pub rep: Option<usize>,
}

impl CellFilter {
    /// Parses `NxR`, where either side may be `*`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("invalid cell filter {s:?}; expected <n|*>x<rep|*>"));
        let (n, r) = s.trim().split_once(['x', '×']).ok_or_else(bad)?;
        let part = |p: &str| -> Result<Option<usize>> {
            match p.trim() {
                "*" => Ok(None),
                v => v.parse::<usize>().map(Some).map_err(|_| bad()),
            }
        };
        Ok(CellFilter { n: part(n)?, rep: part(r)? })
    }

    fn admits(&self, n: usize, rep: usize) -> bool {
        self.n.is_none_or(|v| v == n) && self.rep.is_none_or(|v| v == rep)
    }
}

/// Runs every cell (optionally filtered) and aggregates per `(loss, n)`.
pub fn run_experiment(config: &SimConfig, filters: &[CellFilter]) -> Result<SimReport> {
    let model = config.validate()?;
    let mut jobs = Vec::new();
    for li in 0..config.losses.len() {
        for &n in &config.n_list {
            for rep in 0..config.reps {
                if filters.is_empty() || filters.iter().any(|f| f.admits(n, rep)) {
                    jobs.push((li, n, rep));
                }
            }
        }
    }
    let model_ref: &dyn SeparableModel = model.as_ref();
    let cells = jobs
        .par_iter()
        .map(|&(li, n, rep)| run_cell(config, model_ref, li, n, rep))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (li, loss) in config.losses.iter().enumerate() {
        for &n in &config.n_list {
            let group: Vec<&CellRecord> = cells.iter().filter(|c| c.loss_index == li && c.n == n).collect();
            if group.is_empty() {
                continue;
            }
            let ok: Vec<&&CellRecord> = group.iter().filter(|c| c.converged).collect();
            let mut errs: Vec<f64> = ok.iter().map(|c| c.err).collect();
            errs.sort_by(f64::total_cmp);
            let failures = group.len() - ok.len();
            rows.push(SimRow {
                loss: loss.to_string(),
                n,
                rep_count: group.len(),
                median_err: quantile(&errs, 0.5),
                q1: quantile(&errs, 0.25),
                q3: quantile(&errs, 0.75),
                median_alpha_err: median_of(ok.iter().map(|c| c.alpha_err).collect()),
                median_beta_err: median_of(ok.iter().map(|c| c.beta_err).collect()),
                median_beta_norm: median_of(ok.iter().map(|c| c.beta_norm).collect()),
                max_beta_norm: group.iter().map(|c| c.beta_norm).fold(0.0, f64::max),
                failures,
                flagged: failures as f64 > FAILURE_FLAG_FRACTION * group.len() as f64,
                seconds: group.iter().map(|c| c.seconds).sum(),
            });
        }
    }
    Ok(SimReport { rows, cells })
}

/// Strong-consistency experiment: median estimation error per `(loss, n)`.
pub fn consistency_experiment(config: &SimConfig) -> Result<SimReport> {
    run_experiment(config, &[])
}

/// Per-loss trace of `max_reps ‖β̂ₙ‖` along the n-ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessTrace {
    pub loss: String,
    pub points: Vec<(usize, f64)>,
    /// `10·‖β₀‖`.
    pub bound: f64,
    /// The running maximum over the upper half of the ladder stays within
    /// 5% of its value just before the upper half.
    pub stable: bool,
    pub passed: bool,
}

pub const BOUND_FACTOR: f64 = 10.0;
pub const STABILITY_SLACK: f64 = 0.05;

impl BoundednessTrace {
    pub fn from_report(report: &SimReport, theta0: &ParameterPoint) -> Vec<BoundednessTrace> {
        let bound = BOUND_FACTOR * theta0.beta.iter().map(|b| b * b).sum::<f64>().sqrt();
        let mut losses: Vec<&str> = Vec::new();
        for r in &report.rows {
            if !losses.contains(&r.loss.as_str()) {
                losses.push(&r.loss);
            }
        }
        losses
            .into_iter()
            .map(|loss| {
                let points: Vec<(usize, f64)> =
                    report.rows.iter().filter(|r| r.loss == loss).map(|r| (r.n, r.max_beta_norm)).collect();
                let running: Vec<f64> = points
                    .iter()
                    .scan(0.0_f64, |m, (_, v)| {
                        *m = m.max(*v);
                        Some(*m)
                    })
                    .collect();
                let half = points.len() / 2;
                let last = *running.last().unwrap_or(&0.0);
                let stable = half == 0 || last <= (1.0 + STABILITY_SLACK) * running[half - 1];
                BoundednessTrace {
                    loss: loss.to_string(),
                    passed: stable && last <= bound,
                    points,
                    bound,
                    stable,
                }
            })
            .collect()
    }
}

pub fn beta_boundedness_experiment(config: &SimConfig) -> Result<Vec<BoundednessTrace>> {
    let report = consistency_experiment(config)?;
    Ok(BoundednessTrace::from_report(&report, &config.theta0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub loss: String,
    pub n: usize,
    /// `median_err(loss) / median_err(square)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub report: SimReport,
    pub ratios: Vec<RatioRow>,
}

pub const MAX_CONTAMINATION: f64 = 0.3;

/// Same pipeline under contaminated Gaussian errors, with every loss's
/// median error compared to the least-squares one.
pub fn robustness_experiment(config: &SimConfig) -> Result<RobustnessReport> {
    match config.errdist {
        ErrorDistribution::ContaminatedGaussian { frac, .. } if (0.0..=MAX_CONTAMINATION).contains(&frac) => {}
        _ => {
            return Err(Error::config(format!(
                "robustness experiment needs a contaminated-gaussian error distribution with fraction in [0, {MAX_CONTAMINATION}]"
            )))
        }
    }
    let square = config
        .losses
        .iter()
        .find(|l| l.kind() == LossKind::Square)
        .ok_or_else(|| Error::config("robustness experiment needs the square loss as reference"))?
        .to_string();
    let report = consistency_experiment(config)?;
    let mut ratios = Vec::new();
    for r in &report.rows {
        let base = report.row(&square, r.n).expect("square rows exist for every n").median_err;
        ratios.push(RatioRow { loss: r.loss.clone(), n: r.n, ratio: r.median_err / base });
    }
    Ok(RobustnessReport { report, ratios })
}
