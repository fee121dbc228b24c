//! Seeded sampling from the canonical density `e^{-H/T}/Z`.
//!
//! At fixed tagged position `q` the Hamiltonian is quadratic in the bath
//! variables, so the conditional bath law is an exact product of Gaussians:
//! `q_i ~ N(0, Tε/(1 + αεq²))` and `p_i ~ N(0, T g_i)`. Integrating the bath
//! out leaves the tagged marginal `∝ exp(-(p² + q²)/2T) (1 + αεq²)^{-m/2}`,
//! sampled exactly by rejection from a Gaussian envelope.
//!
//! The density is used on the whole `(q, p)` hyperplane; the invariant sets
//! that make the dynamics non-ergodic are ignored.

use std::io::{BufRead, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::model::{FullState, ModelParams};
use crate::output::fmt_sig;

/// A reproducible random stream identified by `(master_seed, stream_id)`.
///
/// Each stream is a ChaCha8 keystream; distinct `stream_id`s select
/// disjoint ChaCha streams under the same key.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Conditional variance of each unresolved position given the tagged `q`.
#[inline]
pub fn conditional_position_variance(params: &ModelParams, q: f64) -> f64 {
    params.temperature * params.epsilon / (1.0 + params.alpha * params.epsilon * q * q)
}

/// Draws the bath `(q_i, p_i)` from the canonical density conditioned on `q`.
pub fn sample_unresolved_conditional(
    params: &ModelParams,
    q: f64,
    rng: &mut RngStream,
) -> (Vec<f64>, Vec<f64>) {
    let mut qu = vec![0.0; params.m];
    let mut pu = vec![0.0; params.m];
    fill_unresolved_conditional(params, q, rng, &mut qu, &mut pu);
    (qu, pu)
}

pub(crate) fn fill_unresolved_conditional(
    params: &ModelParams,
    q: f64,
    rng: &mut RngStream,
    qu: &mut [f64],
    pu: &mut [f64],
) {
    let sd_q = conditional_position_variance(params, q).sqrt();
    for x in qu.iter_mut() {
        *x = sd_q * rng.normal();
    }
    for (x, g) in pu.iter_mut().zip(&params.g) {
        *x = (params.temperature * g).sqrt() * rng.normal();
    }
}

/// Draws a full state from the invariant density. Also returns the number of
/// proposals the tagged-position rejection step consumed.
pub fn sample_invariant_full_counted(
    params: &ModelParams,
    rng: &mut RngStream,
) -> (FullState, u32) {
    let sd = params.temperature.sqrt();
    let ae = params.alpha * params.epsilon;
    let half_m = 0.5 * params.m as f64;
    let mut proposals = 0u32;
    let q = loop {
        proposals += 1;
        let q = sd * rng.normal();
        let accept = (1.0 + ae * q * q).powf(-half_m);
        if rng.uniform() < accept {
            break q;
        }
    };
    let p = sd * rng.normal();
    let (qu, pu) = sample_unresolved_conditional(params, q, rng);
    (FullState { q, p, qu, pu }, proposals)
}

pub fn sample_invariant_full(params: &ModelParams, rng: &mut RngStream) -> FullState {
    sample_invariant_full_counted(params, rng).0
}

/// Counts over contiguous bins.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalHistogram {
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
}

impl EmpiricalHistogram {
    pub fn new(bin_edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if bin_edges.len() != counts.len() + 1 || counts.is_empty() {
            return Err(invalid(
                "bin_edges",
                format!("{} edges for {} bins", bin_edges.len(), counts.len()),
            ));
        }
        if bin_edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("bin_edges", "must be strictly increasing"));
        }
        Ok(Self { bin_edges, counts })
    }

    /// `bins` equal-width bins over `[lo, hi]`, every sample counted; values
    /// outside the range are clamped into the end bins.
    pub fn from_samples_in(samples: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 {
            return Err(invalid("bins", "must be positive"));
        }
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0u64; bins];
        for &x in samples {
            let idx = ((x - lo) / width).floor();
            let idx = if idx < 0.0 {
                0
            } else {
                (idx as usize).min(bins - 1)
            };
            counts[idx] += 1;
        }
        Self::new(edges, counts)
    }

    /// Equal-width bins spanning the sample range.
    pub fn from_samples(samples: &[f64], bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("histogram samples"));
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::from_samples_in(samples, bins, lo, hi)
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Picks a bin with probability proportional to its count, then a
    /// uniform point inside it.
    pub fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Empty("histogram has no counts"));
        }
        let target = rng.random_range(0..total);
        let mut acc = 0;
        let mut bin = self.counts.len() - 1;
        for (i, &c) in self.counts.iter().enumerate() {
            acc += c;
            if target < acc {
                bin = i;
                break;
            }
        }
        let (lo, hi) = (self.bin_edges[bin], self.bin_edges[bin + 1]);
        Ok(lo + (hi - lo) * rng.uniform())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_left,bin_right,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                fmt_sig(self.bin_edges[i]),
                fmt_sig(self.bin_edges[i + 1]),
                c
            )?;
        }
        Ok(())
    }

    /// Parses the `bin_left,bin_right,count` layout written by `write_csv`.
    /// Adjacent rows must share their boundary.
    pub fn read_csv<R: BufRead>(r: R, path: &str) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_string(),
            reason,
        };
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "bin_left,bin_right,count" => {}
            _ => return Err(bad("missing header `bin_left,bin_right,count`".into())),
        }
        let mut edges = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(bad(format!("row {}: expected 3 columns", i + 2)));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("row {}: {e}", i + 2)))
            };
            let (left, right) = (num(cols[0])?, num(cols[1])?);
            let count = cols[2]
                .trim()
                .parse::<u64>()
                .map_err(|e| bad(format!("row {}: {e}", i + 2)))?;
            match edges.last() {
                None => edges.push(left),
                Some(&prev) if prev == left => {}
                Some(_) => return Err(bad(format!("row {}: bins are not contiguous", i + 2))),
            }
            edges.push(right);
            counts.push(count);
        }
        Self::new(edges, counts).map_err(|e| bad(e.to_string()))
    }
}
