//! Error and predictor distributions with seeded samplers.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, StandardNormal};

use crate::error::{Error, Result};

/// Distribution of the regression errors `e_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorDistribution {
    Gaussian { mean: f64, sd: f64 },
    /// `(1 − frac)·N(0, sd²) + frac·N(outlier_mean, outlier_sd²)`.
    ContaminatedGaussian { sd: f64, frac: f64, outlier_mean: f64, outlier_sd: f64 },
    /// `shift + Exp(rate)`.
    ShiftedExponential { rate: f64, shift: f64 },
}

fn normal_pdf(u: f64, mean: f64, sd: f64) -> f64 {
    let z = (u - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

impl ErrorDistribution {
    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        let d = ErrorDistribution::Gaussian { mean, sd };
        d.validate()?;
        Ok(d)
    }

    pub fn contaminated(sd: f64, frac: f64, outlier_mean: f64, outlier_sd: f64) -> Result<Self> {
        let d = ErrorDistribution::ContaminatedGaussian { sd, frac, outlier_mean, outlier_sd };
        d.validate()?;
        Ok(d)
    }

    pub fn shifted_exponential(rate: f64, shift: f64) -> Result<Self> {
        let d = ErrorDistribution::ShiftedExponential { rate, shift };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ErrorDistribution::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            ErrorDistribution::ContaminatedGaussian { sd, frac, outlier_mean, outlier_sd } => {
                sd.is_finite()
                    && sd > 0.0
                    && (0.0..=1.0).contains(&frac)
                    && outlier_mean.is_finite()
                    && outlier_sd.is_finite()
                    && outlier_sd > 0.0
            }
            ErrorDistribution::ShiftedExponential { rate, shift } => rate.is_finite() && rate > 0.0 && shift.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid error distribution {self:?}")))
        }
    }

    /// Draws one error. With `frac = 0` the contaminated sampler consumes
    /// the generator exactly like the Gaussian one.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorDistribution::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            ErrorDistribution::ContaminatedGaussian { sd, frac, outlier_mean, outlier_sd } => {
                if frac > 0.0 && rng.random::<f64>() < frac {
                    let z: f64 = rng.sample(StandardNormal);
                    outlier_mean + outlier_sd * z
                } else {
                    let z: f64 = rng.sample(StandardNormal);
                    sd * z
                }
            }
            ErrorDistribution::ShiftedExponential { rate, shift } => {
                shift + Exp::new(rate).expect("validated rate").sample(rng)
            }
        }
    }

    /// Closed-form density; every built-in kind has one.
    pub fn density(&self) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        Some(match *self {
            ErrorDistribution::Gaussian { mean, sd } => Box::new(move |u| normal_pdf(u, mean, sd)),
            ErrorDistribution::ContaminatedGaussian { sd, frac, outlier_mean, outlier_sd } => {
                Box::new(move |u| (1.0 - frac) * normal_pdf(u, 0.0, sd) + frac * normal_pdf(u, outlier_mean, outlier_sd))
            }
            ErrorDistribution::ShiftedExponential { rate, shift } => {
                Box::new(move |u| if u < shift { 0.0 } else { rate * (-rate * (u - shift)).exp() })
            }
        })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ErrorDistribution::Gaussian { mean, .. } => mean,
            ErrorDistribution::ContaminatedGaussian { frac, outlier_mean, .. } => frac * outlier_mean,
            ErrorDistribution::ShiftedExponential { rate, shift } => shift + 1.0 / rate,
        }
    }

    /// Integration pieces covering all but a negligible tail: `±10·sd`
    /// around each Gaussian component, and `[shift, shift + 40/rate]` for the
    /// exponential. Pieces are disjoint and sorted.
    pub fn integration_window(&self) -> Vec<(f64, f64)> {
        let mut pieces = match *self {
            ErrorDistribution::Gaussian { mean, sd } => vec![(mean - 10.0 * sd, mean + 10.0 * sd)],
            ErrorDistribution::ContaminatedGaussian { sd, frac, outlier_mean, outlier_sd } => {
                let mut v = vec![(-10.0 * sd, 10.0 * sd)];
                if frac > 0.0 {
                    v.push((outlier_mean - 10.0 * outlier_sd, outlier_mean + 10.0 * outlier_sd));
                }
                v
            }
            ErrorDistribution::ShiftedExponential { rate, shift } => vec![(shift, shift + 40.0 / rate)],
        };
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in pieces {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        merged
    }

    /// Points where the density is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            ErrorDistribution::ShiftedExponential { shift, .. } => vec![shift],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for ErrorDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ErrorDistribution::Gaussian { mean, sd } => write!(f, "gaussian:{mean},{sd}"),
            ErrorDistribution::ContaminatedGaussian { sd, frac, outlier_mean, outlier_sd } => {
                write!(f, "contaminated:{sd},{frac},{outlier_mean},{outlier_sd}")
            }
            ErrorDistribution::ShiftedExponential { rate, shift } => write!(f, "shifted-exp:{rate},{shift}"),
        }
    }
}

pub const VALID_ERRDIST_SPECS: &str =
    "gaussian:<mean>,<sd> | contaminated:<sd>,<frac>,<outlier_mean>,<outlier_sd> | shifted-exp:<rate>,<shift>";

fn parse_numbers(args: &str, expected: usize, spec: &str, valid: &str) -> Result<Vec<f64>> {
    let v: std::result::Result<Vec<f64>, _> = args.split(',').map(|a| a.trim().parse::<f64>()).collect();
    match v {
        Ok(v) if v.len() == expected => Ok(v),
        _ => Err(Error::config(format!("cannot parse {spec:?}; valid specs: {valid}"))),
    }
}

impl FromStr for ErrorDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let Some((name, args)) = s.split_once(':') else {
            return Err(Error::config(format!("unknown error distribution {s:?}; valid specs: {VALID_ERRDIST_SPECS}")));
        };
        match name.trim() {
            "gaussian" => {
                let v = parse_numbers(args, 2, s, VALID_ERRDIST_SPECS)?;
                ErrorDistribution::gaussian(v[0], v[1])
            }
            "contaminated" => {
                let v = parse_numbers(args, 4, s, VALID_ERRDIST_SPECS)?;
                ErrorDistribution::contaminated(v[0], v[1], v[2], v[3])
            }
            "shifted-exp" => {
                let v = parse_numbers(args, 2, s, VALID_ERRDIST_SPECS)?;
                ErrorDistribution::shifted_exponential(v[0], v[1])
            }
            _ => Err(Error::config(format!("unknown error distribution {s:?}; valid specs: {VALID_ERRDIST_SPECS}"))),
        }
    }
}

/// Distribution of scalar predictors.
#[derive(Debug, Clone, PartialEq)]
pub enum XDistribution {
    Uniform { lo: f64, hi: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Discrete { points: Vec<f64>, probs: Vec<f64> },
}

impl XDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            XDistribution::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            XDistribution::LogNormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && *sigma > 0.0,
            XDistribution::Discrete { points, probs } => {
                !points.is_empty()
                    && points.len() == probs.len()
                    && points.iter().all(|p| p.is_finite())
                    && probs.iter().all(|p| p.is_finite() && *p >= 0.0)
                    && (probs.iter().sum::<f64>() - 1.0).abs() < 1e-9
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid predictor distribution {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            XDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            XDistribution::LogNormal { mu, sigma } => LogNormal::new(*mu, *sigma).expect("validated").sample(rng),
            XDistribution::Discrete { points, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (p, w) in points.iter().zip(probs) {
                    acc += w;
                    if u < acc {
                        return *p;
                    }
                }
                *points.last().expect("nonempty")
            }
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// Smallest value the distribution can produce.
    pub fn lower_support(&self) -> f64 {
        match self {
            XDistribution::Uniform { lo, .. } => *lo,
            XDistribution::LogNormal { .. } => 0.0,
            XDistribution::Discrete { points, probs } => points
                .iter()
                .zip(probs)
                .filter(|(_, w)| **w > 0.0)
                .map(|(p, _)| *p)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

impl fmt::Display for XDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XDistribution::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            XDistribution::LogNormal { mu, sigma } => write!(f, "lognormal:{mu},{sigma}"),
            XDistribution::Discrete { points, probs } => {
                let parts: Vec<String> = points.iter().zip(probs).map(|(p, w)| format!("{p}@{w}")).collect();
                write!(f, "discrete:{}", parts.join(","))
            }
        }
    }
}

pub const VALID_XDIST_SPECS: &str = "uniform:<lo>,<hi> | lognormal:<mu>,<sigma> | discrete:<x>@<p>,<x>@<p>,...";

impl FromStr for XDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::config(format!("cannot parse predictor distribution {s:?}; valid specs: {VALID_XDIST_SPECS}"));
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let d = match name.trim() {
            "uniform" => {
                let v = parse_numbers(args, 2, s, VALID_XDIST_SPECS)?;
                XDistribution::Uniform { lo: v[0], hi: v[1] }
            }
            "lognormal" => {
                let v = parse_numbers(args, 2, s, VALID_XDIST_SPECS)?;
                XDistribution::LogNormal { mu: v[0], sigma: v[1] }
            }
            "discrete" => {
                let mut points = Vec::new();
                let mut probs = Vec::new();
                for part in args.split(',') {
                    let (p, w) = part.split_once('@').ok_or_else(bad)?;
                    points.push(p.trim().parse::<f64>().map_err(|_| bad())?);
                    probs.push(w.trim().parse::<f64>().map_err(|_| bad())?);
                }
                XDistribution::Discrete { points, probs }
            }
            _ => return Err(bad()),
        };
        d.validate()?;
        Ok(d)
    }
}
