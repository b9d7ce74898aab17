//! ρ-functions for M-estimation.
//!
//! A ρ-function is continuous, even, nondecreasing in `|u|`, vanishes at the
//! origin and is strictly increasing wherever it is below its supremum `S`.
//! Three families ship with the crate (square, Huber, bisquare); anything
//! else can plug in through [`Rho`] and be screened with
//! [`validate_rho_axioms`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const DEFAULT_HUBER_K: f64 = 1.345;
pub const DEFAULT_BISQUARE_K: f64 = 4.685;

/// Interface shared by built-in and user-supplied losses.
///
/// The raw methods assume a finite argument; the checked entry points are
/// [`rho_value`], [`psi_value`] and [`irls_weight`].
pub trait Rho: Send + Sync {
    fn rho(&self, u: f64) -> f64;

    /// Derivative of `rho`.
    fn psi(&self, u: f64) -> f64;

    /// IRLS weight `psi(u) / u`, continuously extended at `u = 0`.
    fn weight(&self, u: f64) -> f64;

    /// `sup_u rho(u)`; `f64::INFINITY` for unbounded losses.
    fn sup(&self) -> f64;

    fn is_bounded(&self) -> bool {
        self.sup().is_finite()
    }

    /// Points where `ρ` is not twice differentiable; quadrature splits there.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Square,
    Huber,
    Bisquare,
}

/// One of the built-in ρ-functions with its tuning constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossFunction {
    kind: LossKind,
    k: f64,
}

impl LossFunction {
    pub fn square() -> Self {
        LossFunction { kind: LossKind::Square, k: 0.0 }
    }

    pub fn huber(k: f64) -> Result<Self> {
        Self::with_k(LossKind::Huber, k)
    }

    pub fn bisquare(k: f64) -> Result<Self> {
        Self::with_k(LossKind::Bisquare, k)
    }

    fn with_k(kind: LossKind, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::domain(format!("tuning constant must be positive and finite, got {k}")));
        }
        Ok(LossFunction { kind, k })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    /// Tuning constant; `None` for the square loss.
    pub fn k(&self) -> Option<f64> {
        match self.kind {
            LossKind::Square => None,
            _ => Some(self.k),
        }
    }
}

impl Rho for LossFunction {
    fn rho(&self, u: f64) -> f64 {
        match self.kind {
            LossKind::Square => u * u,
            LossKind::Huber => {
                let a = u.abs();
                if a <= self.k {
                    u * u
                } else {
                    2.0 * self.k * a - self.k * self.k
                }
            }
            LossKind::Bisquare => {
                let z = u / self.k;
                if z.abs() >= 1.0 {
                    1.0
                } else {
                    let t = 1.0 - z * z;
                    1.0 - t * t * t
                }
            }
        }
    }

    fn psi(&self, u: f64) -> f64 {
        match self.kind {
            LossKind::Square => 2.0 * u,
            LossKind::Huber => {
                if u.abs() <= self.k {
                    2.0 * u
                } else {
                    2.0 * self.k * u.signum()
                }
            }
            LossKind::Bisquare => {
                let z = u / self.k;
                if z.abs() >= 1.0 {
                    0.0
                } else {
                    let t = 1.0 - z * z;
                    6.0 * u / (self.k * self.k) * t * t
                }
            }
        }
    }

    fn weight(&self, u: f64) -> f64 {
        match self.kind {
            LossKind::Square => 2.0,
            LossKind::Huber => {
                let a = u.abs();
                if a <= self.k {
                    2.0
                } else {
                    2.0 * self.k / a
                }
            }
            LossKind::Bisquare => {
                let z = u / self.k;
                if z.abs() >= 1.0 {
                    0.0
                } else {
                    let t = 1.0 - z * z;
                    6.0 / (self.k * self.k) * t * t
                }
            }
        }
    }

    fn sup(&self) -> f64 {
        match self.kind {
            LossKind::Bisquare => 1.0,
            _ => f64::INFINITY,
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self.kind {
            LossKind::Square => Vec::new(),
            _ => vec![-self.k, self.k],
        }
    }
}

impl fmt::Display for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::Square => write!(f, "square"),
            LossKind::Huber => write!(f, "huber:{}", self.k),
            LossKind::Bisquare => write!(f, "bisquare:{}", self.k),
        }
    }
}

pub const VALID_LOSS_SPECS: &str = "square | huber:<k> | bisquare:<k>";

impl FromStr for LossFunction {
    type Err = Error;

    /// Parses `square`, `huber:k` or `bisquare:k`. A bare `huber` or
    /// `bisquare` takes the default tuning constant.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let k = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(a) => a.parse::<f64>().map_err(|_| {
                    Error::config(format!("invalid tuning constant {a:?} in loss spec {s:?}; valid specs: {VALID_LOSS_SPECS}"))
                }),
            }
        };
        match name {
            "square" if arg.is_none() => Ok(LossFunction::square()),
            "huber" => LossFunction::huber(k(DEFAULT_HUBER_K)?),
            "bisquare" => LossFunction::bisquare(k(DEFAULT_BISQUARE_K)?),
            _ => Err(Error::config(format!("unknown loss spec {s:?}; valid specs: {VALID_LOSS_SPECS}"))),
        }
    }
}

fn finite(u: f64) -> Result<f64> {
    if u.is_finite() {
        Ok(u)
    } else {
        Err(Error::domain(format!("loss argument must be finite, got {u}")))
    }
}

pub fn rho_value<L: Rho + ?Sized>(loss: &L, u: f64) -> Result<f64> {
    Ok(loss.rho(finite(u)?))
}

pub fn psi_value<L: Rho + ?Sized>(loss: &L, u: f64) -> Result<f64> {
    Ok(loss.psi(finite(u)?))
}

pub fn irls_weight<L: Rho + ?Sized>(loss: &L, u: f64) -> Result<f64> {
    Ok(loss.weight(finite(u)?))
}

#[derive(Debug, Clone, PartialEq)]
pub enum AxiomViolation {
    NonzeroAtOrigin { value: f64 },
    NotEven { u: f64, plus: f64, minus: f64 },
    Decreasing { u: f64, v: f64, rho_u: f64, rho_v: f64 },
    NotStrictlyIncreasing { u: f64, v: f64, value: f64 },
    Jump { u: f64, v: f64, jump: f64, allowed: f64 },
    NonFinite { u: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub passed: bool,
    pub violations: Vec<AxiomViolation>,
}

/// Checks the ρ-function axioms on a sorted nonnegative grid.
///
/// Continuity is judged per grid cell: the jump `|ρ(v) − ρ(u)|` may not
/// exceed twice the largest `|ψ|` seen at the cell's ends and midpoint times
/// the cell width (plus 1e-12).
pub fn validate_rho_axioms<L: Rho + ?Sized>(loss: &L, grid: &[f64]) -> Result<AxiomReport> {
    if grid.is_empty() {
        return Err(Error::usage("validate_rho_axioms needs a nonempty grid"));
    }
    if grid.iter().any(|u| !u.is_finite() || *u < 0.0) {
        return Err(Error::usage("grid must be finite and nonnegative"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::usage("grid must be sorted ascending"));
    }

    let sup = loss.sup();
    let mut violations = Vec::new();

    let at_zero = loss.rho(0.0);
    if at_zero != 0.0 {
        violations.push(AxiomViolation::NonzeroAtOrigin { value: at_zero });
    }

    for &u in grid {
        let (plus, minus) = (loss.rho(u), loss.rho(-u));
        if !plus.is_finite() || !minus.is_finite() {
            violations.push(AxiomViolation::NonFinite { u });
            continue;
        }
        if (plus - minus).abs() > 1e-12 * plus.abs().max(1.0) {
            violations.push(AxiomViolation::NotEven { u, plus, minus });
        }
    }

    for w in grid.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v == u {
            continue;
        }
        let (ru, rv) = (loss.rho(u), loss.rho(v));
        if !ru.is_finite() || !rv.is_finite() {
            continue;
        }
        if rv < ru {
            violations.push(AxiomViolation::Decreasing { u, v, rho_u: ru, rho_v: rv });
        } else if ru < sup && rv <= ru {
            violations.push(AxiomViolation::NotStrictlyIncreasing { u, v, value: ru });
        }
        let slope = loss
            .psi(u)
            .abs()
            .max(loss.psi(v).abs())
            .max(loss.psi(0.5 * (u + v)).abs());
        let allowed = 2.0 * slope * (v - u) + 1e-12;
        let jump = (rv - ru).abs();
        if jump > allowed {
            violations.push(AxiomViolation::Jump { u, v, jump, allowed });
        }
    }

    Ok(AxiomReport { passed: violations.is_empty(), violations })
}
