//! Oracles shared by the integration tests and the acceptance target.
//!
//! Closed forms here are written out independently of the library so that
//! a wrong formula in `src/` cannot agree with itself.

#![allow(dead_code)]

use mzlab::analysis::{decompose, fit_decay, CovarianceCurve, NoiseFit};
use mzlab::generator::Ar1PersistentNoise;
use mzlab::integrators::{integrate, kp_step, TimeGrid};
use mzlab::model::{energy_full, energy_reduced, full_rhs_into, reduced_rhs};
use mzlab::sampling::{
    sample_invariant_full, sample_unresolved_conditional, EmpiricalHistogram, RngStream,
};
use mzlab::{FullState, ModelParams, NoiseMultiplier, ReducedState};

/// `½(p² + q² + Σp_i²/g_i + Σq_i²/ε + αq²Σq_i²)`, written out again.
pub fn hamiltonian(params: &ModelParams, y: &[f64]) -> f64 {
    let m = params.m;
    let (q, p) = (y[0], y[1]);
    let mut h = p * p + q * q;
    for i in 0..m {
        let (qi, pi) = (y[2 + i], y[2 + m + i]);
        h += pi * pi / params.g[i] + qi * qi / params.epsilon + params.alpha * q * q * qi * qi;
    }
    0.5 * h
}

/// `½(p² + q² + m ln(1 + αεq²))`.
pub fn reduced_hamiltonian(params: &ModelParams, q: f64, p: f64) -> f64 {
    0.5 * (p * p + q * q + params.m as f64 * (1.0 + params.alpha * params.epsilon * q * q).ln())
}

/// `αΣq_i² − mαε/(1 + αεq²)` from the flat layout.
pub fn z_of(params: &ModelParams, y: &[f64]) -> f64 {
    let ae = params.alpha * params.epsilon;
    let q = y[0];
    let s: f64 = y[2..2 + params.m].iter().map(|x| x * x).sum();
    params.alpha * s - params.m as f64 * ae / (1.0 + ae * q * q)
}

/// A moment estimate against its closed form, in standard errors.
#[derive(Debug, Clone, Copy)]
pub struct Moment {
    pub label: &'static str,
    pub estimate: f64,
    pub expected: f64,
    pub std_err: f64,
}

impl Moment {
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.expected).abs() / self.std_err
    }
}

/// Sample means and variances of the conditional bath at `q` against
/// `Var(q_i) = ε/(1 + αεq²)` and `Var(p_i) = g_i` (unit temperature).
pub fn conditional_moments(params: &ModelParams, q: f64, n: usize, seed: u64) -> Vec<Moment> {
    let mut rng = RngStream::new(seed, 0);
    let m = params.m;
    let mut sum = vec![0.0; 2 * m];
    let mut sum_sq = vec![0.0; 2 * m];
    let mut sum_4 = vec![0.0; 2 * m];
    for _ in 0..n {
        let (qu, pu) = sample_unresolved_conditional(params, q, &mut rng);
        for (k, x) in qu.iter().chain(&pu).enumerate() {
            sum[k] += x;
            sum_sq[k] += x * x;
            sum_4[k] += x.powi(4);
        }
    }
    let nf = n as f64;
    let var_q = params.epsilon / (1.0 + params.alpha * params.epsilon * q * q);
    let mut out = Vec::new();
    for k in 0..2 * m {
        let expected_var = if k < m { var_q } else { params.g[k - m] };
        let mean = sum[k] / nf;
        let second = sum_sq[k] / nf;
        out.push(Moment {
            label: if k < m { "mean q_i" } else { "mean p_i" },
            estimate: mean,
            expected: 0.0,
            std_err: expected_var.sqrt() / nf.sqrt(),
        });
        // E[x²] with known zero mean; Var(x²) = E[x⁴] − E[x²]².
        let var_of_sq = sum_4[k] / nf - second * second;
        out.push(Moment {
            label: if k < m { "var q_i" } else { "var p_i" },
            estimate: second,
            expected: expected_var,
            std_err: (var_of_sq / nf).sqrt(),
        });
    }
    out
}

/// Empirical order `log2(e(dt)/e(dt/2))` of RK4 on `q'' = −q` at `t = 2`.
pub fn rk4_orders() -> Vec<f64> {
    let osc = |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = -y[0];
    };
    let err = |dt: f64| {
        let grid = TimeGrid::span(2.0, dt).unwrap();
        let y = integrate(osc, &[1.0, 0.0], &grid, |_, _, _| {}).unwrap();
        (y[0] - 2f64.cos()).hypot(y[1] + 2f64.sin())
    };
    let dts = [0.2, 0.1, 0.05, 0.025];
    let errs: Vec<f64> = dts.iter().map(|&dt| err(dt)).collect();
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Worst relative drift of `H` over `[0, t_end]` at step `dt` for `n`
/// trajectories started at `(q0, 0)` with a conditional bath.
pub fn full_energy_drift(n: u64, seed: u64, q0: f64, dt: f64, t_end: f64) -> f64 {
    let params = ModelParams::standard();
    let grid = TimeGrid::span(t_end, dt).unwrap();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut rng = RngStream::new(seed, i);
        let (qu, pu) = sample_unresolved_conditional(&params, q0, &mut rng);
        let y0 = FullState {
            q: q0,
            p: 0.0,
            qu,
            pu,
        }
        .to_vec();
        let e0 = hamiltonian(&params, &y0);
        integrate(
            |_, y, dy| full_rhs_into(&params, y, dy),
            &y0,
            &grid,
            |_, _, y| {
                worst = worst.max((hamiltonian(&params, y) - e0).abs() / e0);
            },
        )
        .unwrap();
    }
    worst
}

/// Same check on invariant-density initial data, using the library energy.
pub fn full_energy_drift_invariant(n: u64, seed: u64, dt: f64, t_end: f64) -> f64 {
    let params = ModelParams::standard();
    let grid = TimeGrid::span(t_end, dt).unwrap();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut rng = RngStream::new(seed, i);
        let s0 = sample_invariant_full(&params, &mut rng);
        let e0 = energy_full(&params, &s0).unwrap();
        integrate(
            |_, y, dy| full_rhs_into(&params, y, dy),
            &s0.to_vec(),
            &grid,
            |_, _, y| {
                let e = energy_full(&params, &FullState::from_slice(y).unwrap()).unwrap();
                worst = worst.max((e - e0).abs() / e0);
            },
        )
        .unwrap();
    }
    worst
}

/// Worst relative drift of `Ĥ` under RK4 on the reduced field.
pub fn reduced_energy_drift(starts: &[(f64, f64)], dt: f64, t_end: f64) -> f64 {
    let params = ModelParams::standard();
    let grid = TimeGrid::span(t_end, dt).unwrap();
    let mut worst = 0.0f64;
    for &(q, p) in starts {
        let h0 = reduced_hamiltonian(&params, q, p);
        assert!((energy_reduced(&params, ReducedState::new(q, p)) - h0).abs() < 1e-14 * (1.0 + h0));
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let f = reduced_rhs(&params, ReducedState::new(y[0], y[1]));
            dy[0] = f.q;
            dy[1] = f.p;
        };
        integrate(rhs, &[q, p], &grid, |_, _, y| {
            worst = worst.max((reduced_hamiltonian(&params, y[0], y[1]) - h0).abs() / h0);
        })
        .unwrap();
    }
    worst
}

/// Endpoint errors of the Klauder-Petersen step driven by the exact `z(t)`
/// of one full trajectory, against that trajectory's `(q, p)` at `t_end`.
pub fn replay_errors(dts: &[f64], t_end: f64, seed: u64) -> Vec<f64> {
    let params = ModelParams::standard();
    let fine = dts.iter().copied().fold(f64::INFINITY, f64::min) / 8.0;
    let grid = TimeGrid::span(t_end, fine).unwrap();
    let mut rng = RngStream::new(seed, 0);
    let (qu, pu) = sample_unresolved_conditional(&params, 1.0, &mut rng);
    let y0 = FullState {
        q: 1.0,
        p: 0.0,
        qu,
        pu,
    }
    .to_vec();
    let mut z = Vec::with_capacity(grid.n_steps + 1);
    let end = integrate(
        |_, y, dy| full_rhs_into(&params, y, dy),
        &y0,
        &grid,
        |_, _, y| z.push(z_of(&params, y)),
    )
    .unwrap();
    dts.iter()
        .map(|&dt| {
            let stride = (dt / fine).round() as usize;
            assert!(
                (stride as f64 * fine - dt).abs() < 1e-12,
                "dt must be a multiple of the reference step"
            );
            let n = grid.n_steps / stride;
            let mut s = ReducedState::new(y0[0], y0[1]);
            for j in 0..n {
                s = kp_step(
                    &params,
                    s,
                    j as f64 * dt,
                    dt,
                    z[j * stride],
                    z[(j + 1) * stride],
                    NoiseMultiplier::Q,
                )
                .unwrap();
            }
            (s.q - end[0]).hypot(s.p - end[1])
        })
        .collect()
}

/// Empirical orders of a nominally second-order scheme approach 2 from
/// either side; like the RK4 band (4 ± 5%), each halving must reach 1.9.
pub const REPLAY_MIN_ORDER: f64 = 1.9;

pub fn orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// A persistence histogram over `ln a ∈ [−4, 0]` and its exact moments
/// under "uniform inside the chosen bin".
pub struct SyntheticFit {
    pub fit: NoiseFit,
    pub mean_a: f64,
    pub mean_sqrt_a: f64,
}

pub fn synthetic_fit(beta0: f64, d: f64, zero_fraction: f64) -> SyntheticFit {
    let edges = vec![-4.0, -3.0, -2.0, -1.0, 0.0];
    let counts = vec![1u64, 2, 3, 4];
    let total: u64 = counts.iter().sum();
    // E[e^{cU}] for U uniform on [lo, hi] is (e^{c·hi} − e^{c·lo}) / (c·(hi − lo)).
    let moment = |c: f64| {
        let per_bin: f64 = edges
            .windows(2)
            .zip(&counts)
            .map(|(w, &n)| {
                n as f64 / total as f64 * ((c * w[1]).exp() - (c * w[0]).exp())
                    / (c * (w[1] - w[0]))
            })
            .sum();
        (1.0 - zero_fraction) * per_bin
    };
    SyntheticFit {
        fit: NoiseFit {
            beta0,
            d,
            fit_step: 0.05,
            tau0: 0.5,
            log_a_hist: EmpiricalHistogram::new(edges.clone(), counts.clone()).unwrap(),
            zero_fraction,
        },
        mean_a: moment(1.0),
        mean_sqrt_a: moment(0.5),
    }
}

/// `E[z(0) z(ℓk)]` of the generator at the chosen lags, with standard errors.
pub fn generator_autocovariance(
    fit: &NoiseFit,
    k_sim: f64,
    lags: &[usize],
    n_paths: u64,
    seed: u64,
) -> Vec<(usize, f64, f64)> {
    let max_lag = *lags.iter().max().unwrap();
    let mut sums = vec![0.0; lags.len()];
    let mut sums_sq = vec![0.0; lags.len()];
    for i in 0..n_paths {
        let mut rng = RngStream::new(seed, i);
        let a = mzlab::generator::sample_persistence(fit, Default::default(), &mut rng).unwrap();
        let mut gen = Ar1PersistentNoise::new(fit, k_sim, a, false, rng).unwrap();
        let z: Vec<f64> = (0..=max_lag).map(|_| gen.next_z()).collect();
        for (k, &l) in lags.iter().enumerate() {
            let x = z[0] * z[l];
            sums[k] += x;
            sums_sq[k] += x * x;
        }
    }
    let n = n_paths as f64;
    lags.iter()
        .enumerate()
        .map(|(k, &l)| {
            let mean = sums[k] / n;
            let var = sums_sq[k] / n - mean * mean;
            (l, mean, (var / n).sqrt())
        })
        .collect()
}

/// `max |d̂ − d|` and `max |β̂₀ − β₀|` over a grid of exact geometric inputs.
pub fn geometric_fit_recovery() -> (f64, f64) {
    let mut worst_d = 0.0f64;
    let mut worst_b = 0.0f64;
    for &beta0 in &[0.1008, 0.5, 2.0] {
        for &d in &[0.3f64, 0.7, 0.902, 0.98] {
            let beta: Vec<f64> = (0..40).map(|l| beta0 * d.powi(l)).collect();
            let fit = fit_decay(&beta, 0.05, 1.0).unwrap();
            worst_d = worst_d.max((fit.d - d).abs());
            worst_b = worst_b.max((fit.beta0 - beta0).abs());
        }
    }
    (worst_d, worst_b)
}

/// Largest `|β + A − C|` in units of the rounding of one subtraction.
pub fn decomposition_round_trip(curve: &CovarianceCurve, a: f64) -> f64 {
    let split = decompose(curve, a).unwrap();
    split
        .beta
        .iter()
        .zip(&split.c)
        .map(|(b, c)| {
            let ulp = f64::EPSILON * c.abs().max(a.abs()).max(f64::MIN_POSITIVE);
            (b + split.a_const - c).abs() / ulp
        })
        .fold(0.0, f64::max)
}

/// Stdout and every output file of one `mzlab` invocation.
#[derive(Debug, PartialEq, Eq)]
pub struct CliRun {
    pub stdout: Vec<u8>,
    pub files: std::collections::BTreeMap<String, Vec<u8>>,
}

pub fn run_cli(args: &[&str], threads: Option<&str>) -> CliRun {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_mzlab"));
    cmd.args(args)
        .arg("--out")
        .arg(dir.path())
        .env("RUST_LOG", "warn");
    match threads {
        Some(t) => cmd.env("MZ_THREADS", t),
        None => cmd.env_remove("MZ_THREADS"),
    };
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut files = std::collections::BTreeMap::new();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let entry = entry.unwrap();
        files.insert(
            entry.file_name().to_string_lossy().into_owned(),
            std::fs::read(entry.path()).unwrap(),
        );
    }
    CliRun {
        stdout: out.stdout,
        files,
    }
}

pub const SUBCOMMANDS: [&str; 7] = [
    "ergodicity",
    "truth",
    "tmodel",
    "calibrate",
    "noise-sim",
    "histogram",
    "all",
];
