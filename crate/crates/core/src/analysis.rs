//! Statistics of the normalized noise `z(t)` over an ensemble of trajectories.
//!
//! The covariance `C(τ) = E[z(0) z(τ)]` is estimated with a fixed time
//! origin over stationary initial data. It is split as `C = β + A`, where
//! `A` is the constant floor left by the non-ergodic persistence of initial
//! data and `β` decays. The decaying part is fitted by a geometric
//! (AR(1)) covariance `β₀ d^ℓ` on `[0, τ₀]`, `τ₀` being the first zero of `β`.

use log::debug;

use crate::error::{invalid, Error, Result};
use crate::sampling::EmpiricalHistogram;

/// Covariance curve on the lag grid `ℓ·lag_step`, `ℓ = 0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCurve {
    pub lag_step: f64,
    pub c: Vec<f64>,
    pub c_star: Vec<f64>,
    pub a_const: f64,
    pub beta: Vec<f64>,
    pub n_samples: usize,
}

impl CovarianceCurve {
    pub fn lags(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.c.len()).map(move |l| self.lag_step * l as f64)
    }

    /// Value of `C*` at the lag closest to `tau`.
    pub fn c_star_at(&self, tau: f64) -> f64 {
        let l = ((tau / self.lag_step).round() as usize).min(self.c_star.len() - 1);
        self.c_star[l]
    }

    pub fn c_at(&self, tau: f64) -> f64 {
        let l = ((tau / self.lag_step).round() as usize).min(self.c.len() - 1);
        self.c[l]
    }

    pub fn beta_at(&self, tau: f64) -> f64 {
        let l = ((tau / self.lag_step).round() as usize).min(self.beta.len() - 1);
        self.beta[l]
    }
}

/// How `C(τ)` is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceEstimator {
    /// `z(0)·z(τ)` averaged over the ensemble.
    #[default]
    EnsembleOrigin,
    /// Per-trajectory time average over all origins, then ensemble mean.
    /// Diagnostic only.
    TimeAverage,
}

/// Streaming form of [`ensemble_covariance`]. Trajectories must be added in
/// a fixed order for bit-reproducible sums.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    lag_step: f64,
    estimator: CovarianceEstimator,
    sums: Vec<f64>,
    count: usize,
}

impl CovarianceAccumulator {
    pub fn new(lag_step: f64, max_lag: usize, estimator: CovarianceEstimator) -> Result<Self> {
        if !(lag_step > 0.0) {
            return Err(invalid("lag_step", "must be positive"));
        }
        Ok(Self {
            lag_step,
            estimator,
            sums: vec![0.0; max_lag + 1],
            count: 0,
        })
    }

    pub fn add(&mut self, z: &[f64]) -> Result<()> {
        if z.len() < self.sums.len() {
            return Err(Error::LengthMismatch {
                what: "z trajectory",
                got: z.len(),
                need: self.sums.len(),
            });
        }
        match self.estimator {
            CovarianceEstimator::EnsembleOrigin => {
                let z0 = z[0];
                for (s, zl) in self.sums.iter_mut().zip(z) {
                    *s += z0 * zl;
                }
            }
            CovarianceEstimator::TimeAverage => {
                for (l, s) in self.sums.iter_mut().enumerate() {
                    let n = z.len() - l;
                    let acc: f64 = z[..n].iter().zip(&z[l..]).map(|(a, b)| a * b).sum();
                    *s += acc / n as f64;
                }
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<CovarianceCurve> {
        if self.count == 0 {
            return Err(Error::Empty("ensemble"));
        }
        let n = self.count as f64;
        let c: Vec<f64> = self.sums.iter().map(|s| s / n).collect();
        let c_star = integrated_covariance(&c, self.lag_step)?;
        Ok(CovarianceCurve {
            lag_step: self.lag_step,
            beta: c.clone(),
            c,
            c_star,
            a_const: 0.0,
            n_samples: self.count,
        })
    }
}

/// Estimates `C(ℓk)` for `ℓ = 0..=max_lag` and the integrated covariance.
/// The returned curve has `A = 0` and `β = C` until [`decompose`] is applied.
pub fn ensemble_covariance<Z: AsRef<[f64]>>(
    z_series: &[Z],
    lag_step: f64,
    max_lag: usize,
    estimator: CovarianceEstimator,
) -> Result<CovarianceCurve> {
    if z_series.is_empty() {
        return Err(Error::Empty("ensemble"));
    }
    let mut acc = CovarianceAccumulator::new(lag_step, max_lag, estimator)?;
    for z in z_series {
        acc.add(z.as_ref())?;
    }
    acc.finish()
}

/// Running trapezoidal mean `C*(τ) = τ⁻¹ ∫₀^τ C(s) ds`, with `C*(0) = C(0)`.
pub fn integrated_covariance(c: &[f64], lag_step: f64) -> Result<Vec<f64>> {
    if c.is_empty() {
        return Err(Error::Empty("covariance"));
    }
    let mut out = Vec::with_capacity(c.len());
    out.push(c[0]);
    let mut integral = 0.0;
    for l in 1..c.len() {
        integral += 0.5 * lag_step * (c[l - 1] + c[l]);
        out.push(integral / (lag_step * l as f64));
    }
    Ok(out)
}

/// Per-trajectory persistence parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceSample {
    /// Clipped at zero.
    pub a: f64,
    pub trajectory_id: u64,
    /// The trapezoidal average before clipping.
    pub raw: f64,
}

impl PersistenceSample {
    pub fn clipped(&self) -> bool {
        self.raw < 0.0
    }
}

/// `a = horizon⁻¹ ∫₀^horizon z(0) z(s) ds` by the trapezoidal rule.
pub fn persistence_parameter(
    z: &[f64],
    lag_step: f64,
    horizon: f64,
    trajectory_id: u64,
) -> Result<PersistenceSample> {
    let steps = (horizon / lag_step).round() as usize;
    if !(horizon > 0.0) || steps == 0 {
        return Err(invalid(
            "persistence_horizon",
            "must cover at least one step",
        ));
    }
    if z.len() < steps + 1 {
        return Err(Error::LengthMismatch {
            what: "z trajectory",
            got: z.len(),
            need: steps + 1,
        });
    }
    let z0 = z[0];
    let interior: f64 = z[1..steps].iter().sum();
    let integral = lag_step * (0.5 * (z[0] + z[steps]) + interior);
    let raw = z0 * integral / (lag_step * steps as f64);
    Ok(PersistenceSample {
        a: raw.max(0.0),
        trajectory_id,
        raw,
    })
}

/// Sets `A` and `β = C − A`.
pub fn decompose(curve: &CovarianceCurve, a_const: f64) -> Result<CovarianceCurve> {
    if !a_const.is_finite() {
        return Err(invalid("A", "must be finite"));
    }
    let mut out = curve.clone();
    out.a_const = a_const;
    out.beta = curve.c.iter().map(|c| c - a_const).collect();
    Ok(out)
}

/// First zero of `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstZero {
    pub tau0: f64,
    /// False when `β` never changes sign and `tau0` is the last lag.
    pub crossed: bool,
}

/// Locates the first sign change of `β` by linear interpolation.
pub fn first_zero(beta: &[f64], lag_step: f64) -> Result<FirstZero> {
    match beta.first() {
        None => return Err(Error::Empty("beta")),
        Some(&b0) if !(b0 > 0.0) => {
            return Err(Error::Fit(format!("beta(0) must be positive, got {b0}")))
        }
        _ => {}
    }
    for l in 1..beta.len() {
        let (prev, cur) = (beta[l - 1], beta[l]);
        if cur <= 0.0 {
            let frac = prev / (prev - cur);
            return Ok(FirstZero {
                tau0: lag_step * ((l - 1) as f64 + frac),
                crossed: true,
            });
        }
    }
    Ok(FirstZero {
        tau0: lag_step * (beta.len() - 1) as f64,
        crossed: false,
    })
}

/// Geometric covariance model `β₀ d^ℓ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub beta0: f64,
    pub d: f64,
}

const GOLDEN_TOL: f64 = 1e-9;

/// Least-squares fit of `β₀ d^ℓ` to `β` on `ℓk ≤ τ₀`, with `β₀ = β(0)`.
pub fn fit_decay(beta: &[f64], lag_step: f64, tau0: f64) -> Result<DecayFit> {
    let beta0 = *beta.first().ok_or(Error::Empty("beta"))?;
    if !(beta0 > 0.0) {
        return Err(Error::Fit(format!("beta(0) must be positive, got {beta0}")));
    }
    let n = beta
        .iter()
        .enumerate()
        .take_while(|(l, _)| lag_step * *l as f64 <= tau0 * (1.0 + 1e-12))
        .count();
    if n < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 lags in [0, tau0 = {tau0}], have {n}"
        )));
    }
    let window = &beta[..n];
    let loss = |d: f64| {
        let mut power = 1.0;
        let mut sum = 0.0;
        for b in window {
            let r = b - beta0 * power;
            sum += r * r;
            power *= d;
        }
        sum
    };
    let d = golden_section_min(loss, 0.0, 1.0, GOLDEN_TOL);
    debug!("decay fit over {n} lags: beta0 = {beta0}, d = {d}");
    Ok(DecayFit { beta0, d })
}

fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Carries an AR(1) coefficient fitted at step `k_old` over to step `k_new`.
pub fn rescale_decay(d: f64, k_old: f64, k_new: f64) -> f64 {
    debug_assert!(d > 0.0 && d < 1.0 && k_old > 0.0 && k_new > 0.0);
    d.powf(k_new / k_old)
}

/// Calibrated noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFit {
    pub beta0: f64,
    pub d: f64,
    pub fit_step: f64,
    pub tau0: f64,
    /// Histogram of `ln a` over the trajectories with `a > 0`.
    pub log_a_hist: EmpiricalHistogram,
    /// Fraction of trajectories whose persistence parameter clipped to zero.
    pub zero_fraction: f64,
}

impl NoiseFit {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0) {
            return Err(invalid("beta0", "must be positive"));
        }
        if !(self.d > 0.0 && self.d < 1.0) {
            return Err(invalid("d", format!("must lie in (0, 1), got {}", self.d)));
        }
        if !(self.fit_step > 0.0) {
            return Err(invalid("fit_step", "must be positive"));
        }
        if !(self.tau0 > 0.0) {
            return Err(invalid("tau0", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.zero_fraction) {
            return Err(invalid("zero_fraction", "must lie in [0, 1]"));
        }
        if self.zero_fraction < 1.0 && self.log_a_hist.total() == 0 {
            return Err(Error::Empty("log a histogram"));
        }
        Ok(())
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("KS sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}
