//! Sampled checks of the consistency conditions A–G and Monte Carlo
//! estimates of the population objective `λ(α, β) = Eρ(y − β′h(x, α))`.
//!
//! The conditions are statements about populations. Every checker here
//! evaluates a finite surrogate (sampled predictors, grids of `α`, sampled
//! directions in `B`) and reports a margin that is positive exactly when
//! the check passes.

mod distributions;
pub mod quadrature;

pub use distributions::{ErrorDistribution, XDistribution, VALID_ERRDIST_SPECS, VALID_XDIST_SPECS};

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::loss::Rho;
use crate::model::{BetaCone, ParameterPoint, SeparableModel};
use quadrature::integrate_with_breaks;

/// Tolerance for `β′h(x, α) = β₀′h(x, α₀)` events.
pub const MATCH_TOL: f64 = 1e-9;
/// Tolerance for `β′h(x, α) = 0` events.
pub const ZERO_TOL: f64 = 1e-12;
/// Sample means above this count as divergent for condition B.
pub const OVERFLOW_GUARD: f64 = 1e12;
/// Absolute tolerance of the quadrature route.
pub const QUADRATURE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assumption {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl Assumption {
    pub const ALL: [Assumption; 7] =
        [Assumption::A, Assumption::B, Assumption::C, Assumption::D, Assumption::E, Assumption::F, Assumption::G];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "A" => Ok(Assumption::A),
            "B" => Ok(Assumption::B),
            "C" => Ok(Assumption::C),
            "D" => Ok(Assumption::D),
            "E" => Ok(Assumption::E),
            "F" => Ok(Assumption::F),
            "G" => Ok(Assumption::G),
            other => Err(Error::config(format!("unknown assumption {other:?}; expected one of A,B,C,D,E,F,G"))),
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub assumption: Assumption,
    pub passed: bool,
    pub margin: f64,
    pub details: String,
    pub estimates: Vec<(String, f64)>,
}

impl AssumptionReport {
    fn new(assumption: Assumption, margin: f64, details: String, estimates: Vec<(&str, f64)>) -> Self {
        AssumptionReport {
            assumption,
            passed: margin > 0.0,
            margin,
            details,
            estimates: estimates.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.estimates.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

/// How an expectation over the error distribution is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expectation {
    /// Adaptive Simpson against the closed-form density.
    Quadrature,
    /// Sample mean over `n` seeded draws.
    MonteCarlo { n: usize, seed: u64 },
}

/// Mean with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl McEstimate {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        McEstimate { mean, std_error: (var / n).sqrt() }
    }
}

fn loss_breaks<L: Rho + ?Sized>(loss: &L, shift: f64, errdist: &ErrorDistribution) -> Vec<f64> {
    let mut b = errdist.kinks();
    b.extend(loss.kinks().into_iter().map(|k| shift + k));
    b
}

/// `m(t) = Eρ(e − t)`.
pub fn expected_shifted_loss<L: Rho + ?Sized>(
    loss: &L,
    errdist: &ErrorDistribution,
    t: f64,
    method: Expectation,
) -> Result<f64> {
    Ok(shifted_loss_curve(loss, errdist, &[t], method)?[0])
}

/// `m(t)` for every `t` in `t_grid`. The Monte Carlo route reuses one error
/// sample across all shifts.
pub fn shifted_loss_curve<L: Rho + ?Sized>(
    loss: &L,
    errdist: &ErrorDistribution,
    t_grid: &[f64],
    method: Expectation,
) -> Result<Vec<f64>> {
    errdist.validate()?;
    match method {
        Expectation::Quadrature => {
            let density = errdist
                .density()
                .ok_or_else(|| Error::usage("quadrature needs an error distribution with a density"))?;
            let pieces = errdist.integration_window();
            let span: f64 = pieces.iter().map(|(a, b)| b - a).sum();
            Ok(t_grid
                .iter()
                .map(|&t| {
                    let breaks = loss_breaks(loss, t, errdist);
                    let f = |u: f64| loss.rho(u - t) * density(u);
                    pieces
                        .iter()
                        .map(|&(a, b)| integrate_with_breaks(&f, a, b, &breaks, QUADRATURE_TOL * (b - a) / span))
                        .sum()
                })
                .collect())
        }
        Expectation::MonteCarlo { n, seed } => {
            if n == 0 {
                return Err(Error::usage("Monte Carlo expectation needs n >= 1"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws: Vec<f64> = (0..n).map(|_| errdist.sample(&mut rng)).collect();
            Ok(t_grid
                .iter()
                .map(|&t| draws.iter().map(|e| loss.rho(e - t)).sum::<f64>() / n as f64)
                .collect())
        }
    }
}

/// `λ₀ = Eρ(e)`.
pub fn estimate_lambda0<L: Rho + ?Sized>(loss: &L, errdist: &ErrorDistribution, method: Expectation) -> Result<f64> {
    expected_shifted_loss(loss, errdist, 0.0, method)
}

fn x_rows(x_sample: &[f64], q: usize) -> Result<Vec<&[f64]>> {
    if x_sample.is_empty() || !x_sample.len().is_multiple_of(q) {
        return Err(Error::usage(format!("x_sample must be a nonempty row-major buffer with {q} columns")));
    }
    Ok(x_sample.chunks(q).collect())
}

/// `h(x, α)` at every sampled `x`, stored column by column.
struct Basis {
    n: usize,
    cols: Vec<f64>,
}

impl Basis {
    /// `β′h(x_i, α)` for every row.
    fn combine(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (col, b) in self.cols.chunks_exact(self.n).zip(beta) {
            for (o, h) in out.iter_mut().zip(col) {
                *o += b * h;
            }
        }
        out
    }
}

/// `None` if any entry is not finite or `α` is outside the domain.
fn basis_rows<M: SeparableModel + ?Sized>(model: &M, rows: &[&[f64]], alpha: &[f64]) -> Option<Basis> {
    if !model.alpha_domain().contains(alpha) {
        return None;
    }
    let (n, p) = (rows.len(), model.p2());
    let mut cols = vec![0.0; n * p];
    let mut h = vec![0.0; p];
    for (i, x) in rows.iter().enumerate() {
        model.eval_basis(x, alpha, &mut h);
        for (j, v) in h.iter().enumerate() {
            if !v.is_finite() {
                return None;
            }
            cols[j * n + i] = *v;
        }
    }
    Some(Basis { n, cols })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Condition A, checked structurally: the cone flag names a closed cone,
/// and `project_beta` is idempotent and positively homogeneous on random
/// inputs.
pub fn check_condition_a<M: SeparableModel + ?Sized>(model: &M, samples: usize, seed: u64) -> Result<AssumptionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let beta: Vec<f64> = (0..model.p2()).map(|_| 10.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let t = (4.0 * rng.random::<f64>() - 2.0).exp();
        let p = model.project_beta(&beta)?;
        let pp = model.project_beta(&p)?;
        let scaled: Vec<f64> = beta.iter().map(|b| t * b).collect();
        let ps = model.project_beta(&scaled)?;
        for i in 0..p.len() {
            worst = worst.max((pp[i] - p[i]).abs()).max((ps[i] - t * p[i]).abs() / (1.0 + t * p[i].abs()));
        }
        if !model.beta_cone().contains(&p) {
            worst = f64::INFINITY;
        }
    }
    let cone = match model.beta_cone() {
        BetaCone::NonnegativeOrthant => "nonnegative orthant",
        BetaCone::FullSpace => "full space",
    };
    let margin = if worst <= 1e-12 { 1.0 } else { -worst };
    Ok(AssumptionReport::new(
        Assumption::A,
        margin,
        format!("B is the {cone}: closed and closed under positive scaling; projection homogeneity residual {worst:e}"),
        vec![("projection_residual", worst)],
    ))
}

/// Condition B surrogate: `sup` over sampled `β` and grid `α` of the sample
/// mean of `|ρ(y − β′h(x, α))|`, with `y` simulated at `theta0`. Passes when
/// every mean is finite and below [`OVERFLOW_GUARD`].
#[allow(clippy::too_many_arguments)]
pub fn check_condition_b<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    errdist: &ErrorDistribution,
    theta0: &ParameterPoint,
    beta_samples: &[Vec<f64>],
    alpha_grid: &[Vec<f64>],
    x_sample: &[f64],
    seed: u64,
) -> Result<AssumptionReport> {
    if beta_samples.is_empty() || alpha_grid.is_empty() {
        return Err(Error::usage("condition B needs nonempty beta samples and alpha grid"));
    }
    model.check_theta(theta0)?;
    let rows = x_rows(x_sample, model.q())?;
    let h0 = basis_rows(model, &rows, &theta0.alpha)
        .ok_or_else(|| Error::domain("basis at theta0 is not finite"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = h0.combine(&theta0.beta).into_iter().map(|g| g + errdist.sample(&mut rng)).collect();

    let mut sup: f64 = 0.0;
    for alpha in alpha_grid {
        let Some(h) = basis_rows(model, &rows, alpha) else {
            if model.alpha_domain().contains(alpha) {
                sup = f64::INFINITY;
            }
            continue;
        };
        for beta in beta_samples {
            let m = h.combine(beta).iter().zip(&y).map(|(g, y)| loss.rho(y - g).abs()).sum::<f64>() / rows.len() as f64;
            sup = sup.max(if m.is_finite() { m } else { f64::INFINITY });
        }
    }
    let margin = if sup.is_finite() { (OVERFLOW_GUARD - sup) / OVERFLOW_GUARD } else { -1.0 };
    Ok(AssumptionReport::new(
        Assumption::B,
        margin,
        format!("sup of sampled mean |rho| over {} betas x {} alphas: {sup:e}", beta_samples.len(), alpha_grid.len()),
        vec![("sup_mean_rho", sup)],
    ))
}

/// Condition C: `m(t) = Eρ(e − t)` has its unique grid minimum at `t = 0`.
pub fn check_condition_c<L: Rho + ?Sized>(
    loss: &L,
    errdist: &ErrorDistribution,
    t_grid: &[f64],
    method: Expectation,
) -> Result<AssumptionReport> {
    let zero = t_grid.iter().position(|t| *t == 0.0);
    let symmetric = t_grid.iter().all(|t| t_grid.iter().any(|s| (s + t).abs() <= 1e-12 * (1.0 + t.abs())));
    let Some(zero) = zero.filter(|_| symmetric && t_grid.len() >= 3) else {
        return Err(Error::usage("t_grid must be symmetric around 0, contain 0 and have at least 3 points"));
    };
    let m = shifted_loss_curve(loss, errdist, t_grid, method)?;
    let argmin = (0..m.len()).min_by(|&i, &j| m[i].total_cmp(&m[j])).expect("nonempty");
    let gap = m
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != zero)
        .map(|(_, v)| v - m[zero])
        .fold(f64::INFINITY, f64::min);
    Ok(AssumptionReport::new(
        Assumption::C,
        gap,
        format!("m(t) = E rho(e - t) minimized on the grid at t = {}", t_grid[argmin]),
        vec![("lambda0", m[zero]), ("argmin_t", t_grid[argmin]), ("min_gap", gap)],
    ))
}

/// Fraction of sampled `x` with `|β′h(x, α) − g₀(x)| < MATCH_TOL`.
fn match_fraction(h: &Basis, beta: &[f64], g0: &[f64]) -> f64 {
    let hits = h.combine(beta).iter().zip(g0).filter(|(g, g0)| (*g - *g0).abs() < MATCH_TOL).count();
    hits as f64 / g0.len() as f64
}

fn require_positive_truth<M: SeparableModel + ?Sized>(model: &M, theta0: &ParameterPoint) -> Result<()> {
    model.check_theta(theta0)?;
    if theta0.beta.iter().any(|b| *b <= 0.0) {
        return Err(Error::usage("theta0 must have strictly positive beta entries"));
    }
    Ok(())
}

/// Condition D surrogate: for every sampled `(α, β)` with `α ≠ α₀` the
/// fraction of `x` where the regression functions coincide stays below 1.
pub fn check_identifiability_d<M: SeparableModel + ?Sized>(
    model: &M,
    x_sample: &[f64],
    theta0: &ParameterPoint,
    alpha_samples: &[Vec<f64>],
    beta_samples: &[Vec<f64>],
    min_alpha_distance: f64,
) -> Result<AssumptionReport> {
    require_positive_truth(model, theta0)?;
    if alpha_samples.is_empty() || beta_samples.is_empty() {
        return Err(Error::usage("condition D needs nonempty alpha and beta samples"));
    }
    for a in alpha_samples {
        let d = a.iter().zip(&theta0.alpha).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        if d < min_alpha_distance {
            return Err(Error::usage(format!("alpha sample {a:?} is within {min_alpha_distance} of alpha0")));
        }
    }
    let rows = x_rows(x_sample, model.q())?;
    let h0 = basis_rows(model, &rows, &theta0.alpha).ok_or_else(|| Error::domain("basis at theta0 is not finite"))?;
    let g0 = h0.combine(&theta0.beta);

    let mut worst: f64 = 0.0;
    for alpha in alpha_samples {
        let Some(h) = basis_rows(model, &rows, alpha) else { continue };
        for beta in beta_samples {
            worst = worst.max(match_fraction(&h, beta, &g0));
        }
    }
    Ok(AssumptionReport::new(
        Assumption::D,
        1.0 - worst,
        format!("max matching fraction over {} alphas x {} betas: {worst}", alpha_samples.len(), beta_samples.len()),
        vec![("max_match_fraction", worst)],
    ))
}

/// Condition E surrogate: `δ̂ = max_{α, γ} P̂(|γ′h(x, α)| < zero_tol)` against
/// the bound `1 − λ₀/S` (`λ₀/S = 0` for unbounded losses).
pub fn estimate_delta<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    lambda0: f64,
    x_sample: &[f64],
    alpha_grid: &[Vec<f64>],
    gamma_samples: &[Vec<f64>],
    zero_tol: f64,
) -> Result<AssumptionReport> {
    if alpha_grid.is_empty() || gamma_samples.is_empty() {
        return Err(Error::usage("estimate_delta needs a nonempty alpha grid and gamma sample"));
    }
    for g in gamma_samples {
        let n = dot(g, g).sqrt();
        if g.len() != model.p2() || (n - 1.0).abs() > 1e-9 || !model.beta_cone().contains(g) {
            return Err(Error::usage(format!("gamma sample {g:?} is not a unit vector of the cone")));
        }
    }
    let rows = x_rows(x_sample, model.q())?;
    let mut directions: Vec<&Vec<f64>> = Vec::with_capacity(gamma_samples.len());
    for g in gamma_samples {
        if !directions.contains(&g) {
            directions.push(g);
        }
    }
    let mut delta: f64 = 0.0;
    for alpha in alpha_grid {
        let Some(h) = basis_rows(model, &rows, alpha) else { continue };
        for g in &directions {
            let zeros = h.combine(g).iter().filter(|v| v.abs() < zero_tol).count();
            delta = delta.max(zeros as f64 / rows.len() as f64);
        }
    }
    let s = loss.sup();
    let ratio = if s.is_finite() { lambda0 / s } else { 0.0 };
    let bound = 1.0 - ratio;
    let se = (delta * (1.0 - delta) / rows.len() as f64).sqrt();
    let mut estimates = vec![("delta_hat", delta), ("bound", bound), ("lambda0", lambda0), ("delta_std_error", se)];
    if s.is_finite() {
        estimates.push(("sup_rho", s));
    }
    Ok(AssumptionReport::new(
        Assumption::E,
        bound - delta,
        format!("delta_hat = {delta} vs 1 - lambda0/S = {bound}"),
        estimates,
    ))
}

/// Draws `count` points of `α` with at least one coordinate outside the
/// `K`-neighbourhood of `α₀`: the band `(α₀/K, Kα₀)` for sign-definite
/// coordinates (mirrored for negative ones), the band `(α₀ − K, α₀ + K)` for
/// unrestricted ones.
fn sample_outside_band<M: SeparableModel + ?Sized, R: Rng>(
    model: &M,
    alpha0: &[f64],
    k: f64,
    count: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let domain = model.alpha_domain();
    let p1 = alpha0.len();
    let far = 1e6_f64.ln();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 100 * count {
        attempts += 1;
        let escape = rng.random_range(0..p1);
        let alpha: Vec<f64> = (0..p1)
            .map(|c| {
                let a0 = alpha0[c];
                let definite = domain.is_sign_definite(c) && a0 != 0.0;
                if c == escape {
                    let high = rng.random::<bool>();
                    let jump = rng.random::<f64>() * far;
                    if definite {
                        if high { a0 * k * jump.exp() } else { a0 / k / jump.exp() }
                    } else {
                        let sign = if high { 1.0 } else { -1.0 };
                        a0 + sign * (k + jump.exp() - 1.0)
                    }
                } else if definite {
                    a0 * (2.0 * rng.sample::<f64, _>(StandardNormal)).exp()
                } else {
                    a0 + 10.0 * rng.sample::<f64, _>(StandardNormal)
                }
            })
            .collect();
        if domain.contains(&alpha) {
            out.push(alpha);
        }
    }
    out
}

/// Condition F surrogate over the K-band neighbourhood family:
/// `max_β min_K max_{α outside band K}` of the matching fraction, which
/// must stay below `1 − margin`.
#[allow(clippy::too_many_arguments)]
pub fn check_escape_f<M: SeparableModel + ?Sized>(
    model: &M,
    theta0: &ParameterPoint,
    x_sample: &[f64],
    beta_samples: &[Vec<f64>],
    radius_grid: &[f64],
    alphas_per_radius: usize,
    margin: f64,
    seed: u64,
) -> Result<AssumptionReport> {
    if radius_grid.is_empty() {
        return Err(Error::usage("condition F needs a nonempty radius grid"));
    }
    if radius_grid.iter().any(|k| !(k.is_finite() && *k > 1.0)) || radius_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::usage("radius grid must be increasing with every K > 1"));
    }
    if beta_samples.is_empty() || alphas_per_radius == 0 {
        return Err(Error::usage("condition F needs beta samples and at least one alpha per radius"));
    }
    require_positive_truth(model, theta0)?;
    let rows = x_rows(x_sample, model.q())?;
    let h0 = basis_rows(model, &rows, &theta0.alpha).ok_or_else(|| Error::domain("basis at theta0 is not finite"))?;
    let g0 = h0.combine(&theta0.beta);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases: Vec<Vec<Basis>> = radius_grid
        .iter()
        .map(|&k| {
            sample_outside_band(model, &theta0.alpha, k, alphas_per_radius, &mut rng)
                .iter()
                .filter_map(|a| basis_rows(model, &rows, a))
                .collect()
        })
        .collect();

    let mut stat: f64 = 0.0;
    for beta in beta_samples {
        let over_k = bases
            .iter()
            .map(|hs| hs.iter().map(|h| match_fraction(h, beta, &g0)).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        stat = stat.max(over_k);
    }
    let threshold = 1.0 - margin;
    Ok(AssumptionReport::new(
        Assumption::F,
        threshold - stat,
        format!("surrogate: K-band neighbourhoods K in {radius_grid:?}; max over beta of min over K of max matching fraction = {stat}"),
        vec![("escape_statistic", stat), ("threshold", threshold)],
    ))
}

/// Condition G surrogate: `max ‖h(x, α)‖∞` over grid points inside the
/// model's search box ("inner") and outside it ("outer"). Passes when all
/// values are finite and the outer maximum is below twice the inner one.
/// Grid points outside the parameter domain are skipped.
pub fn check_boundedness_g<M: SeparableModel + ?Sized>(
    model: &M,
    x_sample: &[f64],
    alpha_grid: &[Vec<f64>],
) -> Result<AssumptionReport> {
    let rows = x_rows(x_sample, model.q())?;
    let bx = model.default_search_box();
    let inside = |a: &[f64]| a.iter().zip(&bx).all(|(v, (lo, hi))| v >= lo && v <= hi);
    let (mut inner, mut outer) = (0.0_f64, 0.0_f64);
    let mut finite = true;
    let mut evaluated = 0;
    let mut h = vec![0.0; model.p2()];
    for alpha in alpha_grid {
        if !model.alpha_domain().contains(alpha) {
            continue;
        }
        evaluated += 1;
        let mut m: f64 = 0.0;
        for x in &rows {
            model.eval_basis(x, alpha, &mut h);
            for v in &h {
                if !v.is_finite() {
                    finite = false;
                }
                m = m.max(v.abs());
            }
        }
        if inside(alpha) {
            inner = inner.max(m);
        } else {
            outer = outer.max(m);
        }
    }
    if evaluated == 0 {
        return Err(Error::usage("no alpha grid point lies inside the parameter domain"));
    }
    let sup = inner.max(outer);
    let margin = if finite && sup.is_finite() { 2.0 * inner - outer } else { -1.0 };
    Ok(AssumptionReport::new(
        Assumption::G,
        margin,
        format!("max |h| inside search box {inner:e}, outside {outer:e}; all finite: {finite}"),
        vec![("sup_h", if finite { sup } else { f64::INFINITY }), ("inner_max", inner), ("outer_max", outer)],
    ))
}

/// Grid spanning the model's search box widened tenfold on each side:
/// geometric on `|α|` for sign-definite boxes, arithmetic otherwise.
/// Points outside the parameter domain are dropped.
pub fn alpha_grid_with_margins<M: SeparableModel + ?Sized>(model: &M, points_per_axis: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = model
        .default_search_box()
        .into_iter()
        .map(|(lo, hi)| axis_points(widen(lo, hi), points_per_axis))
        .collect();
    cartesian(&axes).into_iter().filter(|a| model.alpha_domain().contains(a)).collect()
}

/// Grid over the model's search box itself.
pub fn alpha_grid_in_box<M: SeparableModel + ?Sized>(model: &M, points_per_axis: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> =
        model.default_search_box().into_iter().map(|b| axis_points(b, points_per_axis)).collect();
    cartesian(&axes).into_iter().filter(|a| model.alpha_domain().contains(a)).collect()
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if lo > 0.0 {
        (lo / 10.0, hi * 10.0)
    } else if hi < 0.0 {
        (lo * 10.0, hi / 10.0)
    } else {
        let w = hi - lo;
        (lo - 10.0 * w, hi + 10.0 * w)
    }
}

fn axis_points((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let u = i as f64 / (n - 1) as f64;
            if lo > 0.0 {
                (lo.ln() + u * (hi.ln() - lo.ln())).exp()
            } else if hi < 0.0 {
                -((-lo).ln() + u * ((-hi).ln() - (-lo).ln())).exp()
            } else {
                lo + u * (hi - lo)
            }
        })
        .collect()
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect()
    })
}

/// Unit vectors of the cone: the coordinate axes followed by normalized
/// Gaussian draws (folded into the orthant when `B` is the orthant).
pub fn sample_gammas(cone: BetaCone, p2: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f64>> = (0..p2.min(count))
        .map(|j| (0..p2).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    while out.len() < count {
        let mut g: Vec<f64> = (0..p2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if cone == BetaCone::NonnegativeOrthant {
            g.iter_mut().for_each(|v| *v = v.abs());
        }
        let n = dot(&g, &g).sqrt();
        if n > 1e-12 {
            out.push(g.iter().map(|v| v / n).collect());
        }
    }
    out
}

fn draw_population<M: SeparableModel + ?Sized>(
    model: &M,
    errdist: &ErrorDistribution,
    x_dist: &XDistribution,
    theta0: &ParameterPoint,
    n_mc: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if n_mc == 0 {
        return Err(Error::usage("population_objective needs n_mc >= 1"));
    }
    if model.q() != 1 {
        return Err(Error::usage("population sampling supports scalar predictors only"));
    }
    model.check_theta(theta0)?;
    errdist.validate()?;
    x_dist.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n_mc);
    let mut ys = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let x = [x_dist.sample(&mut rng)];
        let e = errdist.sample(&mut rng);
        ys.push(model.predict(&x, theta0)? + e);
        xs.push(x.to_vec());
    }
    Ok((xs, ys))
}

fn losses_at<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    xs: &[Vec<f64>],
    ys: &[f64],
    theta: &ParameterPoint,
) -> Result<Vec<f64>> {
    model.check_theta(theta)?;
    xs.iter().zip(ys).map(|(x, y)| Ok(loss.rho(y - model.predict(x, theta)?))).collect()
}

/// Monte Carlo estimate of `λ(α, β)` with `y = β₀′h(x, α₀) + e`. The same
/// seed yields the same `(x, e)` draws for every `theta`.
#[allow(clippy::too_many_arguments)]
pub fn population_objective<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    errdist: &ErrorDistribution,
    x_dist: &XDistribution,
    theta0: &ParameterPoint,
    theta: &ParameterPoint,
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    let (xs, ys) = draw_population(model, errdist, x_dist, theta0, n_mc, seed)?;
    Ok(McEstimate::from_values(&losses_at(model, loss, &xs, &ys, theta)?))
}

/// Paired estimate of `λ(θ) − λ(θ₀)` on common draws; its standard error is
/// that of the per-draw differences.
#[allow(clippy::too_many_arguments)]
pub fn population_gap<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    errdist: &ErrorDistribution,
    x_dist: &XDistribution,
    theta0: &ParameterPoint,
    theta: &ParameterPoint,
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    let (xs, ys) = draw_population(model, errdist, x_dist, theta0, n_mc, seed)?;
    let at = losses_at(model, loss, &xs, &ys, theta)?;
    let base = losses_at(model, loss, &xs, &ys, theta0)?;
    let diff: Vec<f64> = at.iter().zip(&base).map(|(a, b)| a - b).collect();
    Ok(McEstimate::from_values(&diff))
}
