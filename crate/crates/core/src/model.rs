//! Separable regression models `g(x, α, β) = β′h(x, α)`.

use std::fmt;

use crate::error::{Error, Result};

/// Default margin kept from open domain boundaries.
pub const DEFAULT_DOMAIN_MARGIN: f64 = 1e-12;

/// The set `B` of admissible linear coefficients. Both variants are closed
/// cones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaCone {
    NonnegativeOrthant,
    FullSpace,
}

impl BetaCone {
    pub fn contains(&self, beta: &[f64]) -> bool {
        match self {
            BetaCone::NonnegativeOrthant => beta.iter().all(|b| *b >= 0.0),
            BetaCone::FullSpace => beta.iter().all(|b| b.is_finite()),
        }
    }

    /// Euclidean projection onto the cone.
    pub fn project(&self, beta: &[f64]) -> Vec<f64> {
        match self {
            BetaCone::NonnegativeOrthant => beta.iter().map(|b| b.max(0.0)).collect(),
            BetaCone::FullSpace => beta.to_vec(),
        }
    }
}

/// Per-coordinate open intervals describing `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaDomain {
    pub bounds: Vec<(f64, f64)>,
    pub margin: f64,
}

impl AlphaDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        AlphaDomain { bounds, margin: DEFAULT_DOMAIN_MARGIN }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, alpha: &[f64]) -> bool {
        alpha.len() == self.bounds.len()
            && alpha
                .iter()
                .zip(&self.bounds)
                .all(|(a, (lo, hi))| a.is_finite() && *a > lo + self.margin && *a < hi - self.margin)
    }

    /// True when every coordinate is restricted to one sign.
    pub fn is_sign_definite(&self, coord: usize) -> bool {
        let (lo, hi) = self.bounds[coord];
        lo >= 0.0 || hi <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ParameterPoint {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Self {
        ParameterPoint { alpha, beta }
    }

    /// `(α, β)` flattened.
    pub fn to_vec(&self) -> Vec<f64> {
        self.alpha.iter().chain(&self.beta).copied().collect()
    }
}

/// A model linear in `β` given `α`.
///
/// Implementors provide the raw basis evaluation; the provided methods add
/// domain checking. User models enter through this trait.
pub trait SeparableModel: Send + Sync {
    fn name(&self) -> String;

    /// Predictor dimension.
    fn q(&self) -> usize;

    fn p1(&self) -> usize {
        self.alpha_domain().dim()
    }

    fn p2(&self) -> usize;

    fn alpha_domain(&self) -> &AlphaDomain;

    fn beta_cone(&self) -> BetaCone;

    /// Writes `h(x, α)` into `out` (length `p2`) without domain checks.
    fn eval_basis(&self, x: &[f64], alpha: &[f64], out: &mut [f64]);

    fn x_in_support(&self, _x: &[f64]) -> bool {
        true
    }

    /// Box used to seed the α search.
    fn default_search_box(&self) -> Vec<(f64, f64)>;

    /// Reorders exchangeable parameter blocks into canonical order.
    fn canonicalize(&self, _theta: &mut ParameterPoint) {}

    fn basis(&self, x: &[f64], alpha: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        self.check_alpha(alpha)?;
        let mut out = vec![0.0; self.p2()];
        self.eval_basis(x, alpha, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "{}: basis is not finite at x={x:?}, alpha={alpha:?}",
                self.name()
            )));
        }
        Ok(out)
    }

    fn predict(&self, x: &[f64], theta: &ParameterPoint) -> Result<f64> {
        self.check_beta(&theta.beta)?;
        let h = self.basis(x, &theta.alpha)?;
        Ok(h.iter().zip(&theta.beta).map(|(h, b)| h * b).sum())
    }

    fn project_beta(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.p2() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain(format!("beta must be {} finite values", self.p2())));
        }
        Ok(self.beta_cone().project(beta))
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.q() {
            return Err(Error::domain(format!("{}: x must have {} coordinates", self.name(), self.q())));
        }
        if x.iter().any(|v| !v.is_finite()) || !self.x_in_support(x) {
            return Err(Error::domain(format!("{}: x={x:?} outside model support", self.name())));
        }
        Ok(())
    }

    fn check_alpha(&self, alpha: &[f64]) -> Result<()> {
        if !self.alpha_domain().contains(alpha) {
            return Err(Error::domain(format!(
                "{}: alpha={alpha:?} outside domain {:?}",
                self.name(),
                self.alpha_domain().bounds
            )));
        }
        Ok(())
    }

    fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.p2() || !self.beta_cone().contains(beta) {
            return Err(Error::domain(format!("{}: beta={beta:?} outside cone {:?}", self.name(), self.beta_cone())));
        }
        Ok(())
    }

    fn check_theta(&self, theta: &ParameterPoint) -> Result<()> {
        self.check_alpha(&theta.alpha)?;
        self.check_beta(&theta.beta)
    }
}

impl fmt::Debug for dyn SeparableModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SeparableModel({})", self.name())
    }
}

fn nonnegative_scalar_support(x: &[f64]) -> bool {
    x[0] >= 0.0
}

/// `h(x, α) = x / (x + α)`.
#[derive(Debug, Clone)]
pub struct MichaelisMenten {
    domain: AlphaDomain,
}

pub fn michaelis_menten() -> MichaelisMenten {
    MichaelisMenten { domain: AlphaDomain::new(vec![(0.0, f64::INFINITY)]) }
}

impl SeparableModel for MichaelisMenten {
    fn name(&self) -> String {
        "michaelis-menten".into()
    }
    fn q(&self) -> usize {
        1
    }
    fn p2(&self) -> usize {
        1
    }
    fn alpha_domain(&self) -> &AlphaDomain {
        &self.domain
    }
    fn beta_cone(&self) -> BetaCone {
        BetaCone::NonnegativeOrthant
    }
    fn eval_basis(&self, x: &[f64], alpha: &[f64], out: &mut [f64]) {
        let x = x[0];
        out[0] = if x == 0.0 { 0.0 } else { x / (x + alpha[0]) };
    }
    fn x_in_support(&self, x: &[f64]) -> bool {
        nonnegative_scalar_support(x)
    }
    fn default_search_box(&self) -> Vec<(f64, f64)> {
        vec![(1e-3, 1e3)]
    }
}

/// Lower bound on `α₁` for the logistic model. `sup_α h = 1/α₁` so the
/// bound is what keeps the basis bounded over `A`.
pub const DEFAULT_LOGISTIC_ALPHA1_FLOOR: f64 = 1e-3;

/// `h(x, α) = e^{α₂x} / (1 + α₁(e^{α₂x} − 1))`, evaluated as
/// `1 / (e^{−α₂x} + α₁(1 − e^{−α₂x}))` to avoid overflow.
#[derive(Debug, Clone)]
pub struct LogisticGrowth {
    domain: AlphaDomain,
}

pub fn logistic_growth() -> LogisticGrowth {
    logistic_growth_with_floor(DEFAULT_LOGISTIC_ALPHA1_FLOOR)
}

pub fn logistic_growth_with_floor(alpha1_floor: f64) -> LogisticGrowth {
    LogisticGrowth {
        domain: AlphaDomain::new(vec![(alpha1_floor, f64::INFINITY), (0.0, f64::INFINITY)]),
    }
}

impl LogisticGrowth {
    pub fn alpha1_floor(&self) -> f64 {
        self.domain.bounds[0].0
    }
}

impl SeparableModel for LogisticGrowth {
    fn name(&self) -> String {
        "logistic-growth".into()
    }
    fn q(&self) -> usize {
        1
    }
    fn p2(&self) -> usize {
        1
    }
    fn alpha_domain(&self) -> &AlphaDomain {
        &self.domain
    }
    fn beta_cone(&self) -> BetaCone {
        BetaCone::NonnegativeOrthant
    }
    fn eval_basis(&self, x: &[f64], alpha: &[f64], out: &mut [f64]) {
        let d = (-alpha[1] * x[0]).exp();
        out[0] = 1.0 / (d + alpha[0] * (1.0 - d));
    }
    fn x_in_support(&self, x: &[f64]) -> bool {
        nonnegative_scalar_support(x)
    }
    fn default_search_box(&self) -> Vec<(f64, f64)> {
        vec![(self.alpha1_floor().max(1e-3), 1e3), (1e-3, 1e3)]
    }
}

/// `β₀ + Σ_j β_j e^{α_j x}` with negative (decay) or positive (growth) rates.
#[derive(Debug, Clone)]
pub struct Exponential {
    m: usize,
    growth: bool,
    domain: AlphaDomain,
}

pub fn exponential_decay(m: usize) -> Result<Exponential> {
    exponential(m, false)
}

/// Growth variant. Its basis is unbounded in `α`, so it fails the
/// boundedness condition and carries no consistency guarantee.
pub fn exponential_growth(m: usize) -> Result<Exponential> {
    exponential(m, true)
}

fn exponential(m: usize, growth: bool) -> Result<Exponential> {
    if m == 0 {
        return Err(Error::config("exponential models need at least one rate"));
    }
    let bound = if growth { (0.0, f64::INFINITY) } else { (f64::NEG_INFINITY, 0.0) };
    Ok(Exponential { m, growth, domain: AlphaDomain::new(vec![bound; m]) })
}

impl Exponential {
    pub fn rates(&self) -> usize {
        self.m
    }
    pub fn is_growth(&self) -> bool {
        self.growth
    }
}

impl SeparableModel for Exponential {
    fn name(&self) -> String {
        if self.growth {
            format!("exp-growth:{}", self.m)
        } else {
            format!("exp-decay:{}", self.m)
        }
    }
    fn q(&self) -> usize {
        1
    }
    fn p2(&self) -> usize {
        self.m + 1
    }
    fn alpha_domain(&self) -> &AlphaDomain {
        &self.domain
    }
    fn beta_cone(&self) -> BetaCone {
        BetaCone::NonnegativeOrthant
    }
    fn eval_basis(&self, x: &[f64], alpha: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        for (o, a) in out[1..].iter_mut().zip(alpha) {
            *o = (a * x[0]).exp();
        }
    }
    fn x_in_support(&self, x: &[f64]) -> bool {
        nonnegative_scalar_support(x)
    }
    fn default_search_box(&self) -> Vec<(f64, f64)> {
        if self.growth {
            vec![(1e-3, 10.0); self.m]
        } else {
            vec![(-10.0, -1e-3); self.m]
        }
    }
    /// Sorts `(α_j, β_j)` pairs by rate ascending, ties by coefficient
    /// descending. The intercept stays first.
    fn canonicalize(&self, theta: &mut ParameterPoint) {
        let mut pairs: Vec<(f64, f64)> = theta.alpha.iter().copied().zip(theta.beta[1..].iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        for (j, (a, b)) in pairs.into_iter().enumerate() {
            theta.alpha[j] = a;
            theta.beta[j + 1] = b;
        }
    }
}

pub const VALID_MODEL_SPECS: &str = "michaelis-menten | logistic-growth | exp-decay:<m> | exp-growth:<m>";

/// Resolves a model spec string.
pub fn parse_model(spec: &str) -> Result<Box<dyn SeparableModel>> {
    let spec = spec.trim();
    let rates = |arg: Option<&str>| -> Result<usize> {
        let arg = arg.ok_or_else(|| Error::config(format!("model spec {spec:?} needs a rate count; valid specs: {VALID_MODEL_SPECS}")))?;
        arg.trim()
            .parse::<usize>()
            .map_err(|_| Error::config(format!("invalid rate count in {spec:?}; valid specs: {VALID_MODEL_SPECS}")))
    };
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    match (name, arg) {
        ("michaelis-menten", None) => Ok(Box::new(michaelis_menten())),
        ("logistic-growth", None) => Ok(Box::new(logistic_growth())),
        ("exp-decay", a) => Ok(Box::new(exponential_decay(rates(a)?)?)),
        ("exp-growth", a) => Ok(Box::new(exponential_growth(rates(a)?)?)),
        _ => Err(Error::config(format!("unknown model spec {spec:?}; valid specs: {VALID_MODEL_SPECS}"))),
    }
}
