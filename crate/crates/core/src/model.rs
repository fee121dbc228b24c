//! The tagged-particle heat-bath Hamiltonian and its reductions.
//!
//! One resolved particle `(q, p)` is coupled to `m` unresolved oscillators
//! `(q_i, p_i)` through the Hamiltonian
//!
//! ```text
//! H = ½ (p² + q² + Σ p_i²/g_i + Σ q_i²/ε + α q² Σ q_i²)
//! ```
//!
//! Averaging the tagged force over the bath, conditioned on `q`, gives a
//! closed two-dimensional Hamiltonian system (the conditional-mean or
//! "reduced" dynamics). The noise is `n = q·z` with
//! `z = αΣq_i² − mαε/(1 + αεq²)`; the true force equals the averaged force
//! minus `n`. The reduced, t-model and noise formulas are the closed forms
//! at temperature 1.

use crate::error::{invalid, Error, Result};

/// Physical parameters of the full system.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub m: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub g: Vec<f64>,
    pub temperature: f64,
}

impl ModelParams {
    /// Parameters with `alpha = epsilon = 1/m` and unit temperature.
    pub fn with_bath(g: Vec<f64>) -> Result<Self> {
        let m = g.len();
        let coupling = if m == 0 { 0.0 } else { 1.0 / m as f64 };
        let params = Self {
            m,
            alpha: coupling,
            epsilon: if m == 0 { 1.0 } else { coupling },
            g,
            temperature: 1.0,
        };
        params.validate()?;
        Ok(params)
    }

    /// The two-particle bath used throughout: `m = 2`, `alpha = epsilon = 1/2`,
    /// `g = (√5/2, √3/2)`.
    pub fn standard() -> Self {
        Self::with_bath(vec![5f64.sqrt() / 2.0, 3f64.sqrt() / 2.0]).expect("valid defaults")
    }

    /// A bath-free system: the tagged particle is a unit harmonic oscillator.
    pub fn harmonic() -> Self {
        Self {
            m: 0,
            alpha: 0.0,
            epsilon: 1.0,
            g: Vec::new(),
            temperature: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.g.len() != self.m {
            return Err(invalid(
                "g",
                format!("expected {} values, got {}", self.m, self.g.len()),
            ));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(invalid("epsilon", "must be positive and finite"));
        }
        if !self.alpha.is_finite() {
            return Err(invalid("alpha", "must be finite"));
        }
        if self.alpha < 0.0 {
            // Negative coupling makes 1 + αεq² vanish for large q.
            return Err(invalid("alpha", "must be non-negative"));
        }
        if let Some(bad) = self.g.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(invalid("g", format!("entries must be positive, got {bad}")));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(invalid("temperature", "must be positive and finite"));
        }
        Ok(())
    }

    /// The reduced, t-model and noise closed forms hold at `T = 1` only.
    pub fn require_unit_temperature(&self) -> Result<()> {
        if self.temperature != 1.0 {
            return Err(Error::NonUnitTemperature(self.temperature));
        }
        Ok(())
    }

    /// Length of the flat phase-space vector `[q, p, q_1..q_m, p_1..p_m]`.
    pub fn full_dim(&self) -> usize {
        2 * self.m + 2
    }

    #[inline]
    fn coupling(&self) -> f64 {
        self.alpha * self.epsilon
    }
}

/// A point in the `(2m + 2)`-dimensional phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub q: f64,
    pub p: f64,
    pub qu: Vec<f64>,
    pub pu: Vec<f64>,
}

impl FullState {
    pub fn zeros(m: usize) -> Self {
        Self {
            q: 0.0,
            p: 0.0,
            qu: vec![0.0; m],
            pu: vec![0.0; m],
        }
    }

    pub fn check(&self, params: &ModelParams) -> Result<()> {
        for len in [self.qu.len(), self.pu.len()] {
            if len != params.m {
                return Err(Error::DimensionMismatch {
                    expected: params.m,
                    got: len,
                });
            }
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 + 2 * self.qu.len());
        y.push(self.q);
        y.push(self.p);
        y.extend_from_slice(&self.qu);
        y.extend_from_slice(&self.pu);
        y
    }

    pub fn from_slice(y: &[f64]) -> Result<Self> {
        if y.len() < 2 || !y.len().is_multiple_of(2) {
            return Err(Error::LengthMismatch {
                what: "phase-space vector",
                got: y.len(),
                need: 2,
            });
        }
        let m = (y.len() - 2) / 2;
        Ok(Self {
            q: y[0],
            p: y[1],
            qu: y[2..2 + m].to_vec(),
            pu: y[2 + m..].to_vec(),
        })
    }

    pub fn reduced(&self) -> ReducedState {
        ReducedState {
            q: self.q,
            p: self.p,
        }
    }
}

/// The resolved pair `(q, p)`; also used for the t-model variables `(Q, P)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReducedState {
    pub q: f64,
    pub p: f64,
}

impl ReducedState {
    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }
}

/// Which resolved variable multiplies `z` to form the forcing `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMultiplier {
    /// `n = q·z`, consistent with `z = n/q`.
    #[default]
    Q,
    /// `n = p·z`.
    P,
}

impl NoiseMultiplier {
    #[inline]
    pub fn factor(self, s: ReducedState) -> f64 {
        match self {
            NoiseMultiplier::Q => s.q,
            NoiseMultiplier::P => s.p,
        }
    }
}

/// Right-hand side of the full equations of motion on the flat layout.
///
/// `y` and `dy` must both have length `params.full_dim()`.
#[inline]
pub fn full_rhs_into(params: &ModelParams, y: &[f64], dy: &mut [f64]) {
    let m = params.m;
    let (q, p) = (y[0], y[1]);
    let (qu, pu) = y[2..].split_at(m);
    let sum_sq: f64 = qu.iter().map(|x| x * x).sum();
    dy[0] = p;
    dy[1] = -q * (1.0 + params.alpha * sum_sq);
    let bath_stiffness = (1.0 + params.coupling() * q * q) / params.epsilon;
    let (dqu, dpu) = dy[2..].split_at_mut(m);
    for i in 0..m {
        dqu[i] = pu[i] / params.g[i];
        dpu[i] = -qu[i] * bath_stiffness;
    }
}

/// Time derivative of a full state.
pub fn full_rhs(params: &ModelParams, s: &FullState) -> Result<FullState> {
    s.check(params)?;
    let y = s.to_vec();
    let mut dy = vec![0.0; y.len()];
    full_rhs_into(params, &y, &mut dy);
    FullState::from_slice(&dy)
}

pub(crate) fn energy_full_slice(params: &ModelParams, y: &[f64]) -> f64 {
    let m = params.m;
    let (q, p) = (y[0], y[1]);
    let (qu, pu) = y[2..].split_at(m);
    let sum_sq: f64 = qu.iter().map(|x| x * x).sum();
    let kinetic: f64 = pu.iter().zip(&params.g).map(|(p, g)| p * p / g).sum();
    0.5 * (p * p + q * q + kinetic + sum_sq / params.epsilon + params.alpha * q * q * sum_sq)
}

/// Full Hamiltonian `H`.
pub fn energy_full(params: &ModelParams, s: &FullState) -> Result<f64> {
    s.check(params)?;
    Ok(energy_full_slice(params, &s.to_vec()))
}

/// Bath-averaged tagged force `E[q(1 + αΣq_i²) | q] = q(1 + mαε/(1 + αεq²))`.
#[inline]
pub fn mean_force(params: &ModelParams, q: f64) -> f64 {
    debug_assert_eq!(params.temperature, 1.0);
    q * (1.0 + params.m as f64 * params.coupling() / (1.0 + params.coupling() * q * q))
}

/// Conditional-mean vector field of the resolved pair.
#[inline]
pub fn reduced_rhs(params: &ModelParams, s: ReducedState) -> ReducedState {
    ReducedState {
        q: s.p,
        p: -mean_force(params, s.q),
    }
}

/// Reduced Hamiltonian `½(p² + q² + m ln(1 + αεq²))`.
pub fn energy_reduced(params: &ModelParams, s: ReducedState) -> f64 {
    debug_assert_eq!(params.temperature, 1.0);
    0.5 * (s.p * s.p + s.q * s.q + params.m as f64 * (params.coupling() * s.q * s.q).ln_1p())
}

/// Reduced dynamics plus the t-model memory term, which grows linearly in `t`.
#[inline]
pub fn tmodel_rhs(params: &ModelParams, s: ReducedState, t: f64) -> ReducedState {
    let ae = params.coupling();
    let denom = 1.0 + ae * s.q * s.q;
    let memory = 2.0 * params.m as f64 * ae * ae * s.q * s.q * s.p * t / (denom * denom);
    ReducedState {
        q: s.p,
        p: -mean_force(params, s.q) - memory,
    }
}

pub(crate) fn z_slice(params: &ModelParams, y: &[f64]) -> f64 {
    let q = y[0];
    let sum_sq: f64 = y[2..2 + params.m].iter().map(|x| x * x).sum();
    let ae = params.coupling();
    -(params.m as f64) * ae / (1.0 + ae * q * q) + params.alpha * sum_sq
}

/// Normalized noise `z = αΣq_i² − mαε/(1 + αεq²)`, well defined at `q = 0`.
pub fn z_exact(params: &ModelParams, s: &FullState) -> Result<f64> {
    s.check(params)?;
    debug_assert_eq!(params.temperature, 1.0);
    Ok(z_slice(params, &s.to_vec()))
}

/// Noise `n = q·z = −q(mαε/(1 + αεq²) − αΣq_i²)`.
///
/// With this sign convention the true tagged force is the conditional-mean
/// force *minus* `n`; see [`force_residual`].
pub fn noise_exact(params: &ModelParams, s: &FullState) -> Result<f64> {
    Ok(s.q * z_exact(params, s)?)
}

/// Full tagged force minus its conditional mean, `−q·z = −n`. This is the
/// term that turns the reduced vector field back into the full one.
pub fn force_residual(params: &ModelParams, s: &FullState) -> Result<f64> {
    Ok(-noise_exact(params, s)?)
}
