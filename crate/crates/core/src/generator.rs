//! Sample paths of the calibrated noise model.
//!
//! `z_model(jk) = b(jk) + √a`, where `b` is a stationary AR(1) series
//! `b ← d·b + ξ`, `ξ ~ N(0, β₀(1 − d²))`, and `a` is one persistence draw
//! held fixed along the path. Its autocovariance is `β₀ d^ℓ + E[a]`.

use crate::analysis::{rescale_decay, NoiseFit};
use crate::error::{invalid, Result};
use crate::model::{NoiseMultiplier, ReducedState};
use crate::sampling::RngStream;

/// How the per-path persistence parameter is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PersistenceSource {
    /// Resample the empirical `ln a` histogram.
    #[default]
    Histogram,
    /// Log-normal with the histogram's mean and variance of `ln a`.
    LogNormal,
}

/// Draws one persistence parameter. A clipped (zero) value is returned with
/// the fit's `zero_fraction`.
pub fn sample_persistence(
    fit: &NoiseFit,
    source: PersistenceSource,
    rng: &mut RngStream,
) -> Result<f64> {
    let u = rng.uniform();
    if u < fit.zero_fraction {
        return Ok(0.0);
    }
    let log_a = match source {
        PersistenceSource::Histogram => fit.log_a_hist.sample(rng)?,
        PersistenceSource::LogNormal => {
            let (mu, sigma) = histogram_moments(fit);
            mu + sigma * rng.normal()
        }
    };
    Ok(log_a.exp())
}

fn histogram_moments(fit: &NoiseFit) -> (f64, f64) {
    let h = &fit.log_a_hist;
    let total = h.total() as f64;
    let edges = h.bin_edges();
    let mids = edges.windows(2).map(|w| 0.5 * (w[0] + w[1]));
    let weighted: Vec<(f64, f64)> = mids.zip(h.counts()).map(|(x, &c)| (x, c as f64)).collect();
    let mean = weighted.iter().map(|(x, c)| x * c).sum::<f64>() / total;
    let var = weighted
        .iter()
        .map(|(x, c)| c * (x - mean).powi(2))
        .sum::<f64>()
        / total;
    (mean, var.sqrt())
}

/// One path of the AR(1)-plus-persistence noise on a fixed step.
#[derive(Debug, Clone)]
pub struct Ar1PersistentNoise {
    beta0: f64,
    d: f64,
    step: f64,
    a: f64,
    shift: f64,
    innovation_sd: f64,
    b: f64,
    rng: RngStream,
}

impl Ar1PersistentNoise {
    /// Rescales the fitted `d` to `k_sim` and draws `b(0)` from the
    /// stationary law `N(0, β₀)`. With `random_sign`, `√a` enters with a
    /// random sign instead of `+`.
    pub fn new(
        fit: &NoiseFit,
        k_sim: f64,
        a: f64,
        random_sign: bool,
        mut rng: RngStream,
    ) -> Result<Self> {
        if !(k_sim > 0.0) {
            return Err(invalid("k_sim", format!("must be positive, got {k_sim}")));
        }
        if !(a >= 0.0) {
            return Err(invalid("a", format!("must be non-negative, got {a}")));
        }
        fit.validate()?;
        let d = rescale_decay(fit.d, fit.fit_step, k_sim);
        let innovation_var = fit.beta0 * (1.0 - d * d);
        if !(innovation_var > 0.0) {
            return Err(invalid(
                "d",
                "innovation variance beta0·(1 − d²) must be positive",
            ));
        }
        let sign = if random_sign && rng.uniform() < 0.5 {
            -1.0
        } else {
            1.0
        };
        let b = fit.beta0.sqrt() * rng.normal();
        Ok(Self {
            beta0: fit.beta0,
            d,
            step: k_sim,
            a,
            shift: sign * a.sqrt(),
            innovation_sd: innovation_var.sqrt(),
            b,
            rng,
        })
    }

    /// Current `z`, then advances the AR(1) state by one step.
    #[inline]
    pub fn next_z(&mut self) -> f64 {
        let z = self.b + self.shift;
        self.b = self.d * self.b + self.innovation_sd * self.rng.normal();
        z
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn step(&self) -> f64 {
        self.step
    }
}

/// Forcing `n = factor·z` where the factor is `q` (default) or `p`.
#[inline]
pub fn forcing_value(s: ReducedState, z: f64, multiplier: NoiseMultiplier) -> f64 {
    multiplier.factor(s) * z
}
