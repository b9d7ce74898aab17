//! Flat `key = value` configuration with dotted keys.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated; a search box is written `lo:hi;lo:hi`.

use std::str::FromStr;

use crate::diagnostics::{ErrorDistribution, XDistribution};
use crate::error::{Error, Result};
use crate::loss::LossFunction;
use crate::model::ParameterPoint;
use crate::simlab::SimConfig;
use crate::solver::FitConfig;

/// Environment variable overriding every seed read from a config.
pub const SEED_ENV: &str = "SEPM_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_kv(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::parse(Some(line), format!("expected key = value, found {s:?}")))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::parse(Some(line), "empty key"));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(Error::parse(Some(line), format!("duplicate key {key:?} (first set at line {})", prev.line)));
        }
        out.push(Entry { key, value: v.trim().to_string(), line });
    }
    Ok(out)
}

fn value<T: FromStr>(e: &Entry) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    e.value.parse::<T>().map_err(|err| Error::parse(Some(e.line), format!("{}: {err}", e.key)))
}

fn f64_list(e: &Entry) -> Result<Vec<f64>> {
    e.value
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|err| Error::parse(Some(e.line), format!("{}: {err}", e.key))))
        .collect()
}

fn search_box(e: &Entry) -> Result<Vec<(f64, f64)>> {
    e.value
        .split(';')
        .map(|axis| {
            let bad = || Error::parse(Some(e.line), format!("{}: expected lo:hi per axis, found {axis:?}", e.key));
            let (lo, hi) = axis.split_once(':').ok_or_else(bad)?;
            Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

/// Applies a `fit.*` key to `config`. Returns `false` for keys outside the
/// `fit.` namespace.
fn apply_fit_key(config: &mut FitConfig, e: &Entry) -> Result<bool> {
    let Some(field) = e.key.strip_prefix("fit.") else {
        return Ok(false);
    };
    match field {
        "alpha_starts" => config.alpha_starts = value(e)?,
        "alpha_search_box" => config.alpha_search_box = Some(search_box(e)?),
        "irls_tol" => config.irls_tol = value(e)?,
        "irls_max_iter" => config.irls_max_iter = value(e)?,
        "outer_tol" => config.outer_tol = value(e)?,
        "outer_max_iter" => config.outer_max_iter = value(e)?,
        "seed" => config.seed = value(e)?,
        "scale" => config.scale = value(e)?,
        _ => return Err(Error::config(format!("unknown key {:?} at line {}", e.key, e.line))),
    }
    Ok(true)
}

/// Seed from [`SEED_ENV`], when set.
pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::config(format!("{SEED_ENV} must be an unsigned integer, found {s:?}"))),
        Err(_) => Ok(None),
    }
}

/// Fit configuration from `fit.*` keys; unspecified keys keep their defaults.
pub fn fit_config_from_str(text: &str) -> Result<FitConfig> {
    let mut config = FitConfig::default();
    for e in parse_kv(text)? {
        if !apply_fit_key(&mut config, &e)? {
            return Err(Error::config(format!("unknown key {:?} at line {}; fit configs accept fit.* keys", e.key, e.line)));
        }
    }
    config.validate()?;
    Ok(config)
}

/// Simulation configuration. Required keys: `model`, `theta0.alpha`,
/// `theta0.beta`, `x_dist`, `errdist`, `n_list`, `reps`, `losses`.
/// Optional: `seed` (default 0) and `fit.*`.
pub fn sim_config_from_str(text: &str) -> Result<SimConfig> {
    let mut model = None;
    let mut alpha = None;
    let mut beta = None;
    let mut x_dist = None;
    let mut errdist = None;
    let mut n_list = None;
    let mut reps = None;
    let mut losses = None;
    let mut seed = 0u64;
    let mut fit = FitConfig::default();
    for e in parse_kv(text)? {
        match e.key.as_str() {
            "model" => model = Some(e.value.clone()),
            "theta0.alpha" => alpha = Some(f64_list(&e)?),
            "theta0.beta" => beta = Some(f64_list(&e)?),
            "x_dist" => x_dist = Some(value::<XDistribution>(&e)?),
            "errdist" => errdist = Some(value::<ErrorDistribution>(&e)?),
            "n_list" => {
                n_list = Some(
                    e.value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>().map_err(|err| Error::parse(Some(e.line), format!("n_list: {err}"))))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "reps" => reps = Some(value::<usize>(&e)?),
            "losses" => {
                losses = Some(
                    e.value
                        .split(',')
                        .map(|s| s.trim().parse::<LossFunction>())
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "seed" => seed = value(&e)?,
            _ => {
                if !apply_fit_key(&mut fit, &e)? {
                    return Err(Error::config(format!("unknown key {:?} at line {}", e.key, e.line)));
                }
            }
        }
    }
    let missing: Vec<&str> = [
        ("model", model.is_none()),
        ("theta0.alpha", alpha.is_none()),
        ("theta0.beta", beta.is_none()),
        ("x_dist", x_dist.is_none()),
        ("errdist", errdist.is_none()),
        ("n_list", n_list.is_none()),
        ("reps", reps.is_none()),
        ("losses", losses.is_none()),
    ]
    .into_iter()
    .filter_map(|(k, m)| m.then_some(k))
    .collect();
    if !missing.is_empty() {
        return Err(Error::config(format!("missing keys: {}", missing.join(", "))));
    }
    let config = SimConfig {
        model: model.unwrap(),
        theta0: ParameterPoint::new(alpha.unwrap(), beta.unwrap()),
        x_dist: x_dist.unwrap(),
        errdist: errdist.unwrap(),
        n_list: n_list.unwrap(),
        reps: reps.unwrap(),
        losses: losses.unwrap(),
        seed,
        fit,
    };
    config.validate()?;
    Ok(config)
}

/// Renders a simulation config in the format read by [`sim_config_from_str`].
pub fn sim_config_to_string(c: &SimConfig) -> String {
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
    let mut s = format!(
        "model = {}\ntheta0.alpha = {}\ntheta0.beta = {}\nx_dist = {}\nerrdist = {}\nn_list = {}\nreps = {}\nlosses = {}\nseed = {}\n",
        c.model,
        join(&c.theta0.alpha),
        join(&c.theta0.beta),
        c.x_dist,
        c.errdist,
        c.n_list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
        c.reps,
        c.losses.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(","),
        c.seed
    );
    let f = &c.fit;
    s += &format!(
        "fit.alpha_starts = {}\nfit.irls_tol = {:?}\nfit.irls_max_iter = {}\nfit.outer_tol = {:?}\nfit.outer_max_iter = {}\nfit.seed = {}\nfit.scale = {:?}\n",
        f.alpha_starts, f.irls_tol, f.irls_max_iter, f.outer_tol, f.outer_max_iter, f.seed, f.scale
    );
    if let Some(b) = &f.alpha_search_box {
        let axes: Vec<String> = b.iter().map(|(lo, hi)| format!("{lo:?}:{hi:?}")).collect();
        s += &format!("fit.alpha_search_box = {}\n", axes.join(";"));
    }
    s
}
