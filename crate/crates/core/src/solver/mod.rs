//! M-estimation by variable projection.
//!
//! For fixed `α` the model is linear in `β`, so the inner problem is solved
//! by IRLS with cone-constrained weighted least squares. The outer problem
//! over `α` is a multi-start Nelder–Mead search on the profiled objective.

mod nelder_mead;
mod nnls;

pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use nnls::{min_norm_lstsq, nnls, weighted_cone_ls, ConeLsSolution};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loss::{LossFunction, Rho, DEFAULT_HUBER_K};
use crate::model::{BetaCone, ParameterPoint, SeparableModel};

/// IRLS weights below this are dropped from the weighted solve.
const MIN_WEIGHT: f64 = 1e-12;
/// Objective gap under which two multi-start results count as tied.
const TIE_TOL: f64 = 1e-12;

/// `n` observations of a `q`-dimensional predictor and a scalar response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    q: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from a row-major predictor buffer.
    pub fn new(q: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if q == 0 {
            return Err(Error::usage("predictor dimension must be at least 1"));
        }
        if y.is_empty() {
            return Err(Error::usage("dataset must have at least one observation"));
        }
        if x.len() != q * y.len() {
            return Err(Error::usage(format!("expected {} predictor values, got {}", q * y.len(), x.len())));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::domain("dataset entries must be finite"));
        }
        Ok(Dataset { q, x, y })
    }

    /// Convenience constructor for scalar predictors.
    pub fn from_scalar(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(1, x, y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.q..(i + 1) * self.q]
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Checks the predictors against a model's dimension and support.
    pub fn check_against<M: SeparableModel + ?Sized>(&self, model: &M) -> Result<()> {
        if self.q != model.q() {
            return Err(Error::domain(format!(
                "dataset has {} predictor columns, model {} expects {}",
                self.q,
                model.name(),
                model.q()
            )));
        }
        for i in 0..self.n() {
            model.check_x(self.x_row(i))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub alpha_starts: usize,
    /// Per-coordinate start-generation bounds; `None` uses the model default.
    pub alpha_search_box: Option<Vec<(f64, f64)>>,
    pub irls_tol: f64,
    pub irls_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub seed: u64,
    /// Known residual scale; residuals are divided by it before `ρ`.
    pub scale: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            alpha_starts: 16,
            alpha_search_box: None,
            irls_tol: 1e-10,
            irls_max_iter: 100,
            outer_tol: 1e-8,
            outer_max_iter: 500,
            seed: 0,
            scale: 1.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_starts == 0 || self.irls_max_iter == 0 || self.outer_max_iter == 0 {
            return Err(Error::config("iteration and start counts must be at least 1"));
        }
        for (name, v) in [("irls_tol", self.irls_tol), ("outer_tol", self.outer_tol), ("scale", self.scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if let Some(b) = &self.alpha_search_box {
            if b.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
                return Err(Error::config("alpha_search_box bounds must be finite with lo < hi"));
            }
        }
        Ok(())
    }

    fn search_box<M: SeparableModel + ?Sized>(&self, model: &M) -> Result<Vec<(f64, f64)>> {
        let b = self.alpha_search_box.clone().unwrap_or_else(|| model.default_search_box());
        if b.len() != model.p1() {
            return Err(Error::config(format!(
                "alpha_search_box has {} coordinates, model {} has {}",
                b.len(),
                model.name(),
                model.p1()
            )));
        }
        Ok(b)
    }
}

/// Result of the inner β problem at a fixed α.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// A weighted design was rank deficient; `beta` is a minimum-norm fit.
    pub degenerate: bool,
    /// Fewer observations than linear coefficients.
    pub underdetermined: bool,
    /// Objective after the start and after every IRLS step.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartTrace {
    pub start: Vec<f64>,
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: ParameterPoint,
    pub objective: f64,
    pub converged: bool,
    pub starts_trace: Vec<StartTrace>,
    /// Total Nelder–Mead iterations over all starts.
    pub iterations: usize,
    /// Total profile evaluations over all starts.
    pub evaluations: usize,
    pub degenerate: bool,
}

/// `n × p2` matrix of `h(x_i, α)`.
pub fn basis_matrix<M: SeparableModel + ?Sized>(model: &M, data: &Dataset, alpha: &[f64]) -> Result<DMatrix<f64>> {
    model.check_alpha(alpha)?;
    let (n, p2) = (data.n(), model.p2());
    let mut h = DMatrix::zeros(n, p2);
    let mut row = vec![0.0; p2];
    for i in 0..n {
        model.eval_basis(data.x_row(i), alpha, &mut row);
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::domain(format!("{}: basis not finite at alpha={alpha:?}", model.name())));
            }
            h[(i, j)] = *v;
        }
    }
    Ok(h)
}

fn mean_loss<L: Rho + ?Sized>(loss: &L, h: &DMatrix<f64>, y: &[f64], beta: &[f64], scale: f64) -> f64 {
    let fitted = h * DVector::from_column_slice(beta);
    let total: f64 = y.iter().zip(fitted.iter()).map(|(y, f)| loss.rho((y - f) / scale)).sum();
    total / y.len() as f64
}

/// `λₙ(α, β) = (1/n) Σ ρ(y_i − β′h(x_i, α))` at unit scale.
pub fn objective<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    data: &Dataset,
    theta: &ParameterPoint,
) -> Result<f64> {
    objective_scaled(model, loss, data, theta, 1.0)
}

pub fn objective_scaled<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    data: &Dataset,
    theta: &ParameterPoint,
    scale: f64,
) -> Result<f64> {
    model.check_beta(&theta.beta)?;
    data.check_against(model)?;
    let h = basis_matrix(model, data, &theta.alpha)?;
    Ok(mean_loss(loss, &h, data.y(), &theta.beta, scale))
}

/// IRLS on a precomputed design. Each step solves the weighted cone
/// problem with weights `w(r_i / scale)` and stops once the relative
/// objective change falls below `irls_tol`.
pub fn irls<L: Rho + ?Sized>(
    loss: &L,
    design: &DMatrix<f64>,
    y: &[f64],
    cone: BetaCone,
    beta_init: &[f64],
    config: &FitConfig,
) -> InnerSolution {
    let (n, p) = design.shape();
    let scale = config.scale;
    let mut beta = cone.project(beta_init);
    let mut objective = mean_loss(loss, design, y, &beta, scale);
    let mut history = vec![objective];
    let mut degenerate = false;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.irls_max_iter {
        iterations += 1;
        let fitted = design * DVector::from_column_slice(&beta);
        let weights: Vec<f64> = y.iter().zip(fitted.iter()).map(|(y, f)| loss.weight((y - f) / scale)).collect();
        let keep: Vec<usize> = (0..n).filter(|&i| weights[i] >= MIN_WEIGHT).collect();
        if keep.is_empty() {
            converged = true;
            break;
        }
        let step = if keep.len() == n {
            weighted_cone_ls(design, y, &weights, cone)
        } else {
            let sub = design.select_rows(&keep);
            let ys: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
            let ws: Vec<f64> = keep.iter().map(|&i| weights[i]).collect();
            weighted_cone_ls(&sub, &ys, &ws, cone)
        };
        degenerate |= step.rank_deficient;
        let next = mean_loss(loss, design, y, &step.beta, scale);
        if !next.is_finite() {
            break;
        }
        // A majorization step cannot increase the objective; a rise means
        // rounding noise and the current point is kept.
        if next > objective {
            history.push(objective);
            converged = true;
            break;
        }
        let change = objective - next;
        beta = step.beta;
        objective = next;
        history.push(objective);
        if change <= config.irls_tol * objective.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    InnerSolution { beta, objective, iterations, converged, degenerate, underdetermined: n < p, history }
}

/// Least-squares start for the inner problem (square weights).
fn least_squares_start(design: &DMatrix<f64>, y: &[f64], cone: BetaCone) -> ConeLsSolution {
    weighted_cone_ls(design, y, &vec![1.0; y.len()], cone)
}

/// Solves for β at fixed α by IRLS from `beta_init`, or from the
/// least-squares solution when no start is given.
pub fn solve_beta_given_alpha<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    data: &Dataset,
    alpha: &[f64],
    beta_init: Option<&[f64]>,
    config: &FitConfig,
) -> Result<InnerSolution> {
    config.validate()?;
    data.check_against(model)?;
    let h = basis_matrix(model, data, alpha)?;
    let cone = model.beta_cone();
    match beta_init {
        Some(b) => {
            if b.len() != model.p2() || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("beta_init must be {} finite values", model.p2())));
            }
            Ok(irls(loss, &h, data.y(), cone, b, config))
        }
        None => {
            let ls = least_squares_start(&h, data.y(), cone);
            let mut sol = irls(loss, &h, data.y(), cone, &ls.beta, config);
            sol.degenerate |= ls.rank_deficient;
            Ok(sol)
        }
    }
}

/// Inner solve with the continuation schedule: least squares, then IRLS for
/// unbounded losses; for bounded losses an intermediate Huber(1.345) IRLS
/// supplies the start.
fn profile_on_design<L: Rho + ?Sized>(
    loss: &L,
    design: &DMatrix<f64>,
    y: &[f64],
    cone: BetaCone,
    config: &FitConfig,
) -> InnerSolution {
    let ls = least_squares_start(design, y, cone);
    let mut start = ls.beta;
    let mut degenerate = ls.rank_deficient;
    if loss.is_bounded() {
        let huber = LossFunction::huber(DEFAULT_HUBER_K).expect("default constant is valid");
        let h = irls(&huber, design, y, cone, &start, config);
        degenerate |= h.degenerate;
        start = h.beta;
    }
    let mut sol = irls(loss, design, y, cone, &start, config);
    sol.degenerate |= degenerate;
    sol
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub beta_star: Vec<f64>,
    pub value: f64,
    pub inner: InnerSolution,
}

/// Profiled objective `α ↦ min_β λₙ(α, β)` with its inner minimizer.
pub fn profile_objective<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    data: &Dataset,
    alpha: &[f64],
    config: &FitConfig,
) -> Result<Profile> {
    config.validate()?;
    data.check_against(model)?;
    profile_unchecked(model, loss, data, alpha, config)
}

fn profile_unchecked<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    data: &Dataset,
    alpha: &[f64],
    config: &FitConfig,
) -> Result<Profile> {
    let h = basis_matrix(model, data, alpha)?;
    let inner = profile_on_design(loss, &h, data.y(), model.beta_cone(), config);
    Ok(Profile { beta_star: inner.beta.clone(), value: inner.objective, inner })
}

/// Latin-hypercube starts over `bounds`; sign-definite coordinates are
/// stratified on a log scale of `|α|`.
pub fn latin_hypercube_starts(bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![vec![0.0; bounds.len()]; count];
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(&mut rng);
        for (i, s) in strata.into_iter().enumerate() {
            let u = (s as f64 + rng.random::<f64>()) / count as f64;
            starts[i][d] = if lo > 0.0 {
                (lo.ln() + u * (hi.ln() - lo.ln())).exp()
            } else if hi < 0.0 {
                -((-hi).ln() + u * ((-lo).ln() - (-hi).ln())).exp()
            } else {
                lo + u * (hi - lo)
            };
        }
    }
    starts
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Strict "better than" for multi-start selection: lower objective, or a
/// tie within `TIE_TOL` broken by smaller ‖α‖ and then lexicographic α.
fn beats(a: &StartTrace, b: &StartTrace) -> bool {
    if !b.objective.is_finite() {
        return a.objective.is_finite();
    }
    if a.objective < b.objective - TIE_TOL {
        return true;
    }
    if (a.objective - b.objective).abs() > TIE_TOL {
        return false;
    }
    let (na, nb) = (norm(&a.alpha), norm(&b.alpha));
    if na != nb {
        return na < nb;
    }
    a.alpha.iter().zip(&b.alpha).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

/// M-estimate `argmin_{α ∈ A, β ∈ B} λₙ(α, β)`.
pub fn fit<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    data: &Dataset,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    data.check_against(model)?;
    let bounds = config.search_box(model)?;
    let starts = latin_hypercube_starts(&bounds, config.alpha_starts, config.seed);
    let domain = model.alpha_domain();

    let nm = NelderMeadOptions { max_iter: config.outer_max_iter, tol: config.outer_tol, initial_step: None };
    let mut trace = Vec::with_capacity(starts.len());
    let (mut iterations, mut evaluations) = (0, 0);
    for start in starts {
        let run = nelder_mead(
            |a| {
                if !domain.contains(a) {
                    return f64::INFINITY;
                }
                profile_unchecked(model, loss, data, a, config).map_or(f64::INFINITY, |p| p.value)
            },
            &start,
            &nm,
        );
        iterations += run.iterations;
        evaluations += run.evaluations;
        trace.push(StartTrace {
            start,
            alpha: run.x,
            objective: run.fx,
            converged: run.converged,
            iterations: run.iterations,
        });
    }

    let best = trace
        .iter()
        .fold(None::<&StartTrace>, |acc, t| match acc {
            Some(b) if !beats(t, b) => Some(b),
            _ => Some(t),
        })
        .expect("at least one start");
    if !best.objective.is_finite() {
        return Err(Error::config(format!(
            "all {} starts failed the domain checks of {}",
            trace.len(),
            model.name()
        )));
    }

    let profile = profile_unchecked(model, loss, data, &best.alpha, config)?;
    let mut theta_hat = ParameterPoint::new(best.alpha.clone(), profile.beta_star);
    model.canonicalize(&mut theta_hat);
    let h = basis_matrix(model, data, &theta_hat.alpha)?;
    let objective = mean_loss(loss, &h, data.y(), &theta_hat.beta, config.scale);

    Ok(FitResult {
        theta_hat,
        objective,
        converged: best.converged,
        degenerate: profile.inner.degenerate,
        starts_trace: trace,
        iterations,
        evaluations,
    })
}

/// Exhaustive minimization of `λₙ` over `alpha_grid × beta_grid`, visiting
/// α in the outer loop. Ties keep the first point visited.
pub fn brute_force_oracle<M: SeparableModel + ?Sized, L: Rho + ?Sized>(
    model: &M,
    loss: &L,
    data: &Dataset,
    alpha_grid: &[Vec<f64>],
    beta_grid: &[Vec<f64>],
) -> Result<(ParameterPoint, f64)> {
    if alpha_grid.is_empty() || beta_grid.is_empty() {
        return Err(Error::usage("brute_force_oracle needs nonempty grids"));
    }
    data.check_against(model)?;
    for b in beta_grid {
        model.check_beta(b)?;
    }
    let mut best: Option<(ParameterPoint, f64)> = None;
    for alpha in alpha_grid {
        let h = basis_matrix(model, data, alpha)?;
        for beta in beta_grid {
            let v = mean_loss(loss, &h, data.y(), beta, 1.0);
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((ParameterPoint::new(alpha.clone(), beta.clone()), v));
            }
        }
    }
    Ok(best.expect("grids are nonempty"))
}
