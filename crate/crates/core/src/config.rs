//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment, unknown keys are rejected.
//! Absent keys keep the model-problem defaults; if `m` is given without
//! `alpha`/`epsilon` they default to `1/m`, and `g` must then match `m`.

use std::path::Path;

use crate::analysis::CovarianceEstimator;
use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;
use crate::generator::PersistenceSource;
use crate::model::NoiseMultiplier;

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut m: Option<usize> = None;
    let mut alpha: Option<f64> = None;
    let mut epsilon: Option<f64> = None;
    let mut g: Option<Vec<f64>> = None;
    let mut seen = std::collections::HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| Error::ConfigParse {
            line: line_no,
            reason,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        let float = || {
            value
                .parse::<f64>()
                .map_err(|_| err(format!("`{key}`: `{value}` is not a number")))
        };
        let uint = || {
            value
                .parse::<u64>()
                .map_err(|_| err(format!("`{key}`: `{value}` is not a non-negative integer")))
        };
        let boolean = || match value {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(err(format!("`{key}`: `{value}` is not a boolean"))),
        };
        match key {
            "m" => m = Some(uint()? as usize),
            "alpha" => alpha = Some(float()?),
            "epsilon" => epsilon = Some(float()?),
            "g" => {
                let list = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| err(format!("`g`: `{value}` is not a comma-separated list")))?;
                g = Some(list);
            }
            "temperature" => cfg.params.temperature = float()?,
            "q0" => cfg.q0 = float()?,
            "p0" => cfg.p0 = float()?,
            "dt_full" => cfg.dt_full = float()?,
            "dt_reduced" => cfg.dt_reduced = float()?,
            "t_end" => cfg.t_end = float()?,
            "n_samples" => cfg.n_samples = uint()?,
            "seed" => cfg.seed = uint()?,
            "tau_max" => cfg.tau_max = float()?,
            "persistence_horizon" => cfg.persistence_horizon = float()?,
            "histogram_time" => cfg.histogram_time = float()?,
            "histogram_bins" => cfg.histogram_bins = uint()? as usize,
            "log_a_bins" => cfg.log_a_bins = uint()? as usize,
            "ergodicity_horizon" => cfg.ergodicity_horizon = float()?,
            "noise_multiplier" => {
                cfg.noise_multiplier = match value {
                    "q" => NoiseMultiplier::Q,
                    "p" => NoiseMultiplier::P,
                    _ => {
                        return Err(err(format!(
                            "`noise_multiplier` must be `q` or `p`, got `{value}`"
                        )))
                    }
                }
            }
            "covariance_estimator" => {
                cfg.covariance_estimator = match value {
                    "ensemble" => CovarianceEstimator::EnsembleOrigin,
                    "time_average" => CovarianceEstimator::TimeAverage,
                    _ => {
                        let msg = "`covariance_estimator` must be `ensemble` or `time_average`";
                        return Err(err(format!("{msg}, got `{value}`")));
                    }
                }
            }
            "log_a_source" => {
                cfg.persistence_source = match value {
                    "histogram" => PersistenceSource::Histogram,
                    "lognormal" => PersistenceSource::LogNormal,
                    _ => {
                        return Err(err(format!(
                            "`log_a_source` must be `histogram` or `lognormal`, got `{value}`"
                        )))
                    }
                }
            }
            "random_sign_sqrt_a" => cfg.random_sign_sqrt_a = boolean()?,
            _ => return Err(err(format!("unknown key `{key}`"))),
        }
    }

    if let Some(m) = m {
        if m == 0 {
            return Err(crate::error::invalid("m", "must be at least 1"));
        }
        cfg.params.m = m;
        let coupling = 1.0 / m as f64;
        cfg.params.alpha = coupling;
        cfg.params.epsilon = coupling;
        if g.is_none() && m != 2 {
            return Err(crate::error::invalid(
                "g",
                format!("m = {m} requires `g` with {m} values"),
            ));
        }
    }
    if let Some(a) = alpha {
        cfg.params.alpha = a;
    }
    if let Some(e) = epsilon {
        cfg.params.epsilon = e;
    }
    if let Some(g) = g {
        cfg.params.g = g;
    }
    cfg.validate()?;
    Ok(cfg)
}
