//! End-to-end numerical experiments.
//!
//! Every ensemble assigns one random stream per trajectory, derived from the
//! master seed, an experiment tag and the trajectory index. Per-trajectory
//! records are folded in index order, so outputs do not depend on how many
//! workers ran them.

use log::{info, warn};

use crate::analysis::{
    decompose, first_zero, fit_decay, ks_statistic, persistence_parameter, CovarianceAccumulator,
    CovarianceCurve, CovarianceEstimator, NoiseFit, PersistenceSample,
};
use crate::error::{invalid, Error, Result};
use crate::exec::{Execution, DEFAULT_BATCH};
use crate::generator::{sample_persistence, Ar1PersistentNoise, PersistenceSource};
use crate::integrators::{kp_step, Rk4, TimeGrid};
use crate::model::{
    energy_full_slice, energy_reduced, full_rhs_into, tmodel_rhs, z_slice, ModelParams,
    NoiseMultiplier, ReducedState,
};
use crate::sampling::{
    fill_unresolved_conditional, sample_invariant_full_counted, EmpiricalHistogram, RngStream,
};

/// Experiment tags, packed into the high bits of the stream id.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Tag {
    Ergodicity = 1,
    Truth = 2,
    Calibration = 3,
    NoiseModel = 4,
}

fn stream(seed: u64, tag: Tag, index: u64) -> RngStream {
    debug_assert!(index < 1 << 48);
    RngStream::new(seed, ((tag as u64) << 48) | index)
}

/// Run configuration. Every field has the model problem's default.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub q0: f64,
    pub p0: f64,
    pub dt_full: f64,
    pub dt_reduced: f64,
    pub t_end: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub tau_max: f64,
    pub persistence_horizon: f64,
    pub noise_multiplier: NoiseMultiplier,
    pub histogram_time: f64,
    pub histogram_bins: usize,
    pub log_a_bins: usize,
    pub ergodicity_horizon: f64,
    pub covariance_estimator: CovarianceEstimator,
    pub persistence_source: PersistenceSource,
    pub random_sign_sqrt_a: bool,
    /// Runtime only; never read from config files.
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::standard(),
            q0: 1.0,
            p0: 0.0,
            dt_full: 0.05,
            dt_reduced: 0.01,
            t_end: 20.0,
            n_samples: 20_000,
            seed: 0,
            tau_max: 20.0,
            persistence_horizon: 20.0,
            noise_multiplier: NoiseMultiplier::Q,
            histogram_time: 20.0,
            histogram_bins: 60,
            log_a_bins: 60,
            ergodicity_horizon: 500.0,
            covariance_estimator: CovarianceEstimator::EnsembleOrigin,
            persistence_source: PersistenceSource::Histogram,
            random_sign_sqrt_a: false,
            execution: Execution::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let positive = [
            ("dt_full", self.dt_full),
            ("dt_reduced", self.dt_reduced),
            ("t_end", self.t_end),
            ("tau_max", self.tau_max),
            ("persistence_horizon", self.persistence_horizon),
            ("histogram_time", self.histogram_time),
            ("ergodicity_horizon", self.ergodicity_horizon),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !self.q0.is_finite() || !self.p0.is_finite() {
            return Err(invalid("q0", "initial data must be finite"));
        }
        if self.n_samples == 0 {
            return Err(invalid("n_samples", "must be positive"));
        }
        if self.n_samples >= 1 << 48 {
            return Err(invalid("n_samples", "must be below 2^48"));
        }
        if self.histogram_bins == 0 {
            return Err(invalid("histogram_bins", "must be positive"));
        }
        if self.log_a_bins == 0 {
            return Err(invalid("log_a_bins", "must be positive"));
        }
        if self.histogram_time > self.t_end + 1e-12 {
            return Err(invalid("histogram_time", "must not exceed t_end"));
        }
        if self.tau_max < self.dt_full {
            return Err(invalid("tau_max", "must cover at least one step"));
        }
        self.stride()?;
        Ok(())
    }

    /// Number of reduced steps per full step; the two grids must nest.
    pub fn stride(&self) -> Result<usize> {
        let ratio = self.dt_full / self.dt_reduced;
        let stride = ratio.round();
        if stride < 1.0 || (ratio - stride).abs() > 1e-9 * ratio {
            return Err(invalid(
                "dt_reduced",
                format!("dt_full / dt_reduced must be an integer, got {ratio}"),
            ));
        }
        Ok(stride as usize)
    }

    fn full_grid(&self) -> Result<TimeGrid> {
        TimeGrid::span(self.t_end, self.dt_full)
    }

    fn histogram_index(&self, dt: f64) -> usize {
        (self.histogram_time / dt).round() as usize
    }
}

/// A single path in the `(q, p)` plane with its (conserved or dissipated) energy.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrace {
    pub times: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub energy: Vec<f64>,
}

impl PhaseTrace {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            p: Vec::with_capacity(n),
            energy: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: f64, q: f64, p: f64, e: f64) {
        self.times.push(t);
        self.q.push(q);
        self.p.push(p);
        self.energy.push(e);
    }

    /// `max_t |E(t) − E(0)| / |E(0)|`.
    pub fn relative_energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy
            .iter()
            .map(|e| (e - e0).abs())
            .fold(0.0, f64::max)
            / e0.abs()
    }

    /// `min_t (q² + p²)`.
    pub fn min_radius_sq(&self) -> f64 {
        self.q
            .iter()
            .zip(&self.p)
            .map(|(q, p)| q * q + p * p)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Ensemble means on the full-system output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean_q: Vec<f64>,
    pub mean_p: Vec<f64>,
    pub var_q: Vec<f64>,
    pub n_samples: u64,
    pub seed: u64,
    pub label: String,
    /// `q(histogram_time)` of every member, in trajectory order.
    pub endpoint_q: Vec<f64>,
}

/// Welford accumulation of per-time moments, folded in trajectory order.
struct Moments {
    n: u64,
    mean_q: Vec<f64>,
    mean_p: Vec<f64>,
    m2_q: Vec<f64>,
    endpoint_q: Vec<f64>,
}

impl Moments {
    fn new(len: usize, n_samples: u64) -> Self {
        Self {
            n: 0,
            mean_q: vec![0.0; len],
            mean_p: vec![0.0; len],
            m2_q: vec![0.0; len],
            endpoint_q: Vec::with_capacity(n_samples as usize),
        }
    }

    fn add(&mut self, path: PathRecord) {
        self.n += 1;
        let n = self.n as f64;
        for j in 0..self.mean_q.len() {
            let dq = path.q[j] - self.mean_q[j];
            self.mean_q[j] += dq / n;
            self.m2_q[j] += dq * (path.q[j] - self.mean_q[j]);
            self.mean_p[j] += (path.p[j] - self.mean_p[j]) / n;
        }
        self.endpoint_q.push(path.endpoint_q);
    }

    fn finish(self, times: Vec<f64>, seed: u64, label: &str) -> EnsembleResult {
        let n = self.n as f64;
        EnsembleResult {
            times,
            mean_q: self.mean_q,
            mean_p: self.mean_p,
            var_q: self.m2_q.into_iter().map(|m| m / n).collect(),
            n_samples: self.n,
            seed,
            label: label.to_string(),
            endpoint_q: self.endpoint_q,
        }
    }
}

struct PathRecord {
    q: Vec<f64>,
    p: Vec<f64>,
    endpoint_q: f64,
}

fn full_rhs_fn(params: &ModelParams) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
    move |_t, y, dy| full_rhs_into(params, y, dy)
}

fn blow_up(stream_id: u64, source: Error) -> Error {
    Error::TrajectoryBlowUp {
        stream_id,
        source: Box::new(source),
    }
}

/// Steps the full system over `grid`, calling `observe(j, y)` at every grid point.
fn simulate_full<O: FnMut(usize, &[f64])>(
    params: &ModelParams,
    y: &mut [f64],
    grid: &TimeGrid,
    mut observe: O,
) -> Result<()> {
    let mut rk = Rk4::new(y.len());
    let mut rhs = full_rhs_fn(params);
    observe(0, y);
    for j in 0..grid.n_steps {
        rk.step(&mut rhs, grid.time(j), y, grid.dt);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                step: j + 1,
                t: grid.time(j + 1),
            });
        }
        observe(j + 1, y);
    }
    Ok(())
}

fn conditional_initial_state(cfg: &ExperimentConfig, rng: &mut RngStream) -> Vec<f64> {
    let m = cfg.params.m;
    let mut y = vec![0.0; cfg.params.full_dim()];
    y[0] = cfg.q0;
    y[1] = cfg.p0;
    let (qu, pu) = y[2..].split_at_mut(m);
    fill_unresolved_conditional(&cfg.params, cfg.q0, rng, qu, pu);
    y
}

/// One long full-system trajectory from `(q0, p0)` with a conditionally
/// sampled bath, recorded every `dt_full` up to `ergodicity_horizon`.
pub fn run_ergodicity_trace(cfg: &ExperimentConfig) -> Result<PhaseTrace> {
    cfg.validate()?;
    let grid = TimeGrid::span(cfg.ergodicity_horizon, cfg.dt_full)?;
    let mut rng = stream(cfg.seed, Tag::Ergodicity, 0);
    let mut y = conditional_initial_state(cfg, &mut rng);
    let mut trace = PhaseTrace::with_capacity(grid.n_steps + 1);
    simulate_full(&cfg.params, &mut y, &grid, |j, y| {
        trace.push(grid.time(j), y[0], y[1], energy_full_slice(&cfg.params, y))
    })
    .map_err(|e| blow_up(rng.stream_id(), e))?;
    Ok(trace)
}

/// Conditional expectations `E[q(t) | q0, p0]` from the full system.
pub fn run_truth_expectations(cfg: &ExperimentConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    let grid = cfg.full_grid()?;
    let len = grid.n_steps + 1;
    let hist_j = cfg.histogram_index(cfg.dt_full);
    let mut moments = Moments::new(len, cfg.n_samples);
    cfg.execution.for_each_ordered::<_, Error, _, _>(
        cfg.n_samples,
        DEFAULT_BATCH,
        |i| {
            let mut rng = stream(cfg.seed, Tag::Truth, i);
            let mut y = conditional_initial_state(cfg, &mut rng);
            let mut rec = PathRecord {
                q: Vec::with_capacity(len),
                p: Vec::with_capacity(len),
                endpoint_q: f64::NAN,
            };
            simulate_full(&cfg.params, &mut y, &grid, |j, y| {
                rec.q.push(y[0]);
                rec.p.push(y[1]);
                if j == hist_j {
                    rec.endpoint_q = y[0];
                }
            })
            .map_err(|e| blow_up(rng.stream_id(), e))?;
            Ok(rec)
        },
        |_, rec| {
            moments.add(rec);
            Ok(())
        },
    )?;
    info!("truth ensemble: {} trajectories", cfg.n_samples);
    Ok(moments.finish(grid.times(), cfg.seed, "truth"))
}

/// The t-model from `(q0, p0)`, integrated by RK4 with `dt_full`. The
/// recorded energy is the reduced Hamiltonian.
pub fn run_tmodel(cfg: &ExperimentConfig) -> Result<PhaseTrace> {
    cfg.validate()?;
    cfg.params.require_unit_temperature()?;
    let grid = cfg.full_grid()?;
    let params = &cfg.params;
    let mut trace = PhaseTrace::with_capacity(grid.n_steps + 1);
    crate::integrators::integrate(
        |t, y: &[f64], dy: &mut [f64]| {
            let d = tmodel_rhs(params, ReducedState::new(y[0], y[1]), t);
            dy[0] = d.q;
            dy[1] = d.p;
        },
        &[cfg.q0, cfg.p0],
        &grid,
        |_, t, y| {
            trace.push(
                t,
                y[0],
                y[1],
                energy_reduced(params, ReducedState::new(y[0], y[1])),
            )
        },
    )?;
    Ok(trace)
}

/// Output of the noise calibration pipeline.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub fit: NoiseFit,
    /// Decomposed with `A = E[a]`.
    pub curve: CovarianceCurve,
    pub persistence: Vec<PersistenceSample>,
    /// Mean of the persistence samples.
    pub a_mean: f64,
    /// `C*(τ_max)`, the tail cross-check on `A`.
    pub c_star_tail: f64,
    pub tau0_crossed: bool,
    pub clipped: usize,
    pub acceptance_rate: f64,
}

/// Samples stationary initial data, records `z(t)` along full-system
/// trajectories and fits the AR(1)-plus-persistence noise model.
pub fn calibrate_noise(cfg: &ExperimentConfig) -> Result<Calibration> {
    cfg.validate()?;
    cfg.params.require_unit_temperature()?;
    let k = cfg.dt_full;
    let max_lag = (cfg.tau_max / k).round() as usize;
    let horizon_steps = (cfg.persistence_horizon / k).round() as usize;
    let grid = TimeGrid::new(0.0, k, max_lag.max(horizon_steps))?;
    let mut acc = CovarianceAccumulator::new(k, max_lag, cfg.covariance_estimator)?;
    let mut persistence = Vec::with_capacity(cfg.n_samples as usize);
    let mut proposals = 0u64;
    cfg.execution.for_each_ordered::<_, Error, _, _>(
        cfg.n_samples,
        DEFAULT_BATCH,
        |i| {
            let mut rng = stream(cfg.seed, Tag::Calibration, i);
            let (s0, tries) = sample_invariant_full_counted(&cfg.params, &mut rng);
            let mut y = s0.to_vec();
            let mut z = Vec::with_capacity(grid.n_steps + 1);
            simulate_full(&cfg.params, &mut y, &grid, |_, y| {
                z.push(z_slice(&cfg.params, y))
            })
            .map_err(|e| blow_up(rng.stream_id(), e))?;
            let a = persistence_parameter(&z, k, cfg.persistence_horizon, i)?;
            Ok((z, a, tries))
        },
        |_, (z, a, tries)| {
            acc.add(&z)?;
            persistence.push(a);
            proposals += tries as u64;
            Ok(())
        },
    )?;
    let raw = acc.finish()?;
    let n = persistence.len() as f64;
    let a_mean = persistence.iter().map(|s| s.a).sum::<f64>() / n;
    let clipped = persistence.iter().filter(|s| s.clipped()).count();
    let acceptance_rate = n / proposals as f64;
    info!("invariant sampler acceptance rate {acceptance_rate:.4}");
    if clipped > 0 {
        warn!(
            "{clipped} of {} persistence samples were negative and clipped to 0",
            persistence.len()
        );
    }

    let curve = decompose(&raw, a_mean)?;
    let c_star_tail = *curve.c_star.last().expect("non-empty curve");
    info!(
        "A = E[a] = {a_mean:.6}; tail C*({}) = {c_star_tail:.6}",
        cfg.tau_max
    );
    let zero = first_zero(&curve.beta, k)?;
    if !zero.crossed {
        warn!(
            "beta has no zero crossing on [0, {}]; fitting the whole range",
            cfg.tau_max
        );
    }
    let decay = fit_decay(&curve.beta, k, zero.tau0)?;
    let logs: Vec<f64> = persistence
        .iter()
        .filter(|s| s.a > 0.0)
        .map(|s| s.a.ln())
        .collect();
    let log_a_hist = if logs.is_empty() {
        EmpiricalHistogram::new(vec![0.0, 1.0], vec![0])?
    } else {
        EmpiricalHistogram::from_samples(&logs, cfg.log_a_bins)?
    };
    let fit = NoiseFit {
        beta0: decay.beta0,
        d: decay.d,
        fit_step: k,
        tau0: zero.tau0,
        log_a_hist,
        zero_fraction: (persistence.len() - logs.len()) as f64 / n,
    };
    fit.validate()?;
    Ok(Calibration {
        fit,
        curve,
        persistence,
        a_mean,
        c_star_tail,
        tau0_crossed: zero.crossed,
        clipped,
        acceptance_rate,
    })
}

/// Ensemble of the noise-forced reduced system from `(q0, p0)`, integrated
/// with the Klauder-Petersen step `dt_reduced` and reported on the
/// `dt_full` grid.
pub fn run_noise_model_ensemble(cfg: &ExperimentConfig, fit: &NoiseFit) -> Result<EnsembleResult> {
    cfg.validate()?;
    cfg.params.require_unit_temperature()?;
    fit.validate()?;
    let stride = cfg.stride()?;
    let fine = TimeGrid::span(cfg.t_end, cfg.dt_reduced)?;
    let coarse = cfg.full_grid()?;
    let len = coarse.n_steps + 1;
    let hist_j = cfg.histogram_index(cfg.dt_reduced);
    let mut moments = Moments::new(len, cfg.n_samples);
    cfg.execution.for_each_ordered::<_, Error, _, _>(
        cfg.n_samples,
        DEFAULT_BATCH,
        |i| {
            let mut rng = stream(cfg.seed, Tag::NoiseModel, i);
            let stream_id = rng.stream_id();
            let a = sample_persistence(fit, cfg.persistence_source, &mut rng)?;
            let mut noise =
                Ar1PersistentNoise::new(fit, cfg.dt_reduced, a, cfg.random_sign_sqrt_a, rng)?;
            let mut s = ReducedState::new(cfg.q0, cfg.p0);
            let mut rec = PathRecord {
                q: Vec::with_capacity(len),
                p: Vec::with_capacity(len),
                endpoint_q: if hist_j == 0 { cfg.q0 } else { f64::NAN },
            };
            rec.q.push(s.q);
            rec.p.push(s.p);
            let mut z_now = noise.next_z();
            for j in 0..fine.n_steps {
                let z_next = noise.next_z();
                s = kp_step(
                    &cfg.params,
                    s,
                    fine.time(j),
                    cfg.dt_reduced,
                    z_now,
                    z_next,
                    cfg.noise_multiplier,
                )
                .map_err(|e| match e {
                    Error::NonFinite { t, .. } => {
                        blow_up(stream_id, Error::NonFinite { step: j + 1, t })
                    }
                    other => other,
                })?;
                z_now = z_next;
                if (j + 1) % stride == 0 && rec.q.len() < len {
                    rec.q.push(s.q);
                    rec.p.push(s.p);
                }
                if j + 1 == hist_j {
                    rec.endpoint_q = s.q;
                }
            }
            Ok(rec)
        },
        |_, rec| {
            moments.add(rec);
            Ok(())
        },
    )?;
    info!("noise-model ensemble: {} paths", cfg.n_samples);
    Ok(moments.finish(coarse.times(), cfg.seed, "noise_model"))
}

/// Histograms of two sample sets on a common range, plus their KS distance.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramComparison {
    pub truth: EmpiricalHistogram,
    pub model: EmpiricalHistogram,
    pub ks: f64,
}

pub fn histogram_compare(truth: &[f64], model: &[f64], bins: usize) -> Result<HistogramComparison> {
    if truth.is_empty() || model.is_empty() {
        return Err(Error::Empty("histogram samples"));
    }
    let all = truth.iter().chain(model);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(HistogramComparison {
        truth: EmpiricalHistogram::from_samples_in(truth, bins, lo, hi)?,
        model: EmpiricalHistogram::from_samples_in(model, bins, lo, hi)?,
        ks: ks_statistic(truth, model)?,
    })
}

/// KS distance between the first and second halves of a sample set: the
/// resampling noise floor for [`histogram_compare`].
pub fn split_half_ks(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Empty("split-half sample"));
    }
    let (a, b) = samples.split_at(samples.len() / 2);
    ks_statistic(a, b)
}

/// `(∫ (a − b)² dt)^{1/2}` by the trapezoidal rule on a uniform grid.
pub fn l2_distance(a: &[f64], b: &[f64], dt: f64) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).collect();
    if sq.len() < 2 {
        return 0.0;
    }
    let interior: f64 = sq[1..sq.len() - 1].iter().sum();
    (dt * (0.5 * (sq[0] + sq[sq.len() - 1]) + interior)).sqrt()
}
