//! Fixed-step time stepping.
//!
//! Deterministic systems use classical RK4. The noise-driven reduced system
//! uses a Klauder-Petersen predictor-corrector: a Heun step whose forcing is
//! the colored noise sampled at the two step endpoints. The noise has finite
//! variance per step, so no `√dt` scaling enters.

use crate::error::{invalid, Error, Result};
use crate::model::{reduced_rhs, ModelParams, NoiseMultiplier, ReducedState};

/// A uniform grid `t0, t0 + dt, …, t0 + n_steps·dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(invalid("n_steps", "must be at least 1"));
        }
        Ok(Self { t0, dt, n_steps })
    }

    /// Grid covering `[0, t_end]` with `round(t_end/dt)` steps.
    pub fn span(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        Self::new(0.0, dt, (t_end / dt).round() as usize)
    }

    #[inline]
    pub fn time(&self, j: usize) -> f64 {
        self.t0 + self.dt * j as f64
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|j| self.time(j)).collect()
    }
}

/// Classical RK4 with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            stage: vec![0.0; dim],
        }
    }

    /// Advances `y` in place from `t` to `t + dt`.
    #[allow(clippy::needless_range_loop)]
    pub fn step<F>(&mut self, rhs: &mut F, t: f64, y: &mut [f64], dt: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let half = 0.5 * dt;
        rhs(t, y, &mut self.k1);
        for i in 0..y.len() {
            self.stage[i] = y[i] + half * self.k1[i];
        }
        rhs(t + half, &self.stage, &mut self.k2);
        for i in 0..y.len() {
            self.stage[i] = y[i] + half * self.k2[i];
        }
        rhs(t + half, &self.stage, &mut self.k3);
        for i in 0..y.len() {
            self.stage[i] = y[i] + dt * self.k3[i];
        }
        rhs(t + dt, &self.stage, &mut self.k4);
        let sixth = dt / 6.0;
        for i in 0..y.len() {
            y[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// One RK4 step. Fails if the result is not finite.
pub fn rk4_step<F>(mut rhs: F, t: f64, y: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut out = y.to_vec();
    Rk4::new(y.len()).step(&mut rhs, t, &mut out, dt);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite { step: 1, t: t + dt })
    }
}

/// Integrates over `grid`, calling `observer(j, t_j, y_j)` for `j = 0..=n_steps`.
pub fn integrate<F, O>(mut rhs: F, y0: &[f64], grid: &TimeGrid, mut observer: O) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(usize, f64, &[f64]),
{
    let mut y = y0.to_vec();
    let mut stepper = Rk4::new(y.len());
    observer(0, grid.t0, &y);
    for j in 0..grid.n_steps {
        stepper.step(&mut rhs, grid.time(j), &mut y, grid.dt);
        let t = grid.time(j + 1);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { step: j + 1, t });
        }
        observer(j + 1, t, &y);
    }
    Ok(y)
}

/// Heun step of the deterministic reduced system.
pub fn heun_step(params: &ModelParams, s: ReducedState, dt: f64) -> ReducedState {
    let k1 = reduced_rhs(params, s);
    let pred = ReducedState::new(s.q + dt * k1.q, s.p + dt * k1.p);
    let k2 = reduced_rhs(params, pred);
    let half = 0.5 * dt;
    ReducedState::new(s.q + half * (k1.q + k2.q), s.p + half * (k1.p + k2.p))
}

/// Predictor-corrector step of `dψ/dt = drift(ψ) − (0, factor(ψ)·z(t))` with
/// `z` known at both step endpoints. The forcing factor is taken from the
/// stage state in both predictor and corrector.
///
/// The minus sign matches `z = αΣq_i² − mαε/(1 + αεq²)`: the full force is
/// the reduced one minus `q·z`.
pub fn kp_step_with<D>(
    drift: D,
    s: ReducedState,
    dt: f64,
    z_now: f64,
    z_next: f64,
    multiplier: NoiseMultiplier,
) -> ReducedState
where
    D: Fn(ReducedState) -> ReducedState,
{
    let f1 = drift(s);
    let k1 = ReducedState::new(f1.q, f1.p - multiplier.factor(s) * z_now);
    let pred = ReducedState::new(s.q + dt * k1.q, s.p + dt * k1.p);
    let f2 = drift(pred);
    let k2 = ReducedState::new(f2.q, f2.p - multiplier.factor(pred) * z_next);
    let half = 0.5 * dt;
    ReducedState::new(s.q + half * (k1.q + k2.q), s.p + half * (k1.p + k2.p))
}

/// Klauder-Petersen step of the noise-forced reduced system.
pub fn kp_step(
    params: &ModelParams,
    s: ReducedState,
    t: f64,
    dt: f64,
    z_now: f64,
    z_next: f64,
    multiplier: NoiseMultiplier,
) -> Result<ReducedState> {
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let next = kp_step_with(|x| reduced_rhs(params, x), s, dt, z_now, z_next, multiplier);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite { step: 1, t: t + dt })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn oscillator(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn zero_field_leaves_state() {
        let y = rk4_step(
            |_, _, dy: &mut [f64]| dy.fill(0.0),
            0.0,
            &[1.5, -2.0, 3.0],
            0.1,
        )
        .unwrap();
        assert_eq!(y, vec![1.5, -2.0, 3.0]);
    }

    #[test]
    fn one_oscillator_step_matches_cosine() {
        let y = rk4_step(oscillator, 0.0, &[1.0, 0.0], 0.05).unwrap();
        assert!((y[0] - 0.05f64.cos()).abs() < 1e-8);
        assert!((y[0] - 0.99875026).abs() < 1e-8);
        assert!((y[1] + 0.05f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn integrate_observes_every_step() {
        let grid = TimeGrid::new(0.0, 0.05, 1).unwrap();
        let single = rk4_step(oscillator, 0.0, &[1.0, 0.0], 0.05).unwrap();
        let end = integrate(oscillator, &[1.0, 0.0], &grid, |_, _, _| {}).unwrap();
        assert_eq!(single, end);

        let grid = TimeGrid::new(0.0, 0.1, 37).unwrap();
        let mut seen = Vec::new();
        integrate(oscillator, &[1.0, 0.0], &grid, |j, t, _| seen.push((j, t))).unwrap();
        assert_eq!(seen.len(), 38);
        assert_eq!(seen[0], (0, 0.0));
        assert_relative_eq!(seen[37].1, 3.7, epsilon = 1e-12);
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |dt: f64| {
            let grid = TimeGrid::span(2.0, dt).unwrap();
            let y = integrate(oscillator, &[1.0, 0.0], &grid, |_, _, _| {}).unwrap();
            (y[0] - 2f64.cos()).hypot(y[1] + 2f64.sin())
        };
        let (e1, e2) = (err(0.1), err(0.05));
        let ratio = e1 / e2;
        assert!((14.0..18.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_reported() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let err = integrate(
            |_, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0] * 1e200,
            &[1e100],
            &grid,
            |_, _, _| {},
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 1, .. }));
        assert!(rk4_step(|_, _, dy: &mut [f64]| dy[0] = f64::NAN, 0.0, &[0.0], 0.1).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 0.0, 5).is_err());
        assert!(TimeGrid::new(0.0, 0.1, 0).is_err());
        assert_eq!(TimeGrid::span(20.0, 0.05).unwrap().n_steps, 400);
    }

    #[test]
    fn kp_without_noise_is_heun() {
        let params = ModelParams::standard();
        let mut a = ReducedState::new(1.0, 0.0);
        let mut b = a;
        for j in 0..500 {
            a = kp_step(
                &params,
                a,
                j as f64 * 0.01,
                0.01,
                0.0,
                0.0,
                NoiseMultiplier::Q,
            )
            .unwrap();
            b = heun_step(&params, b, 0.01);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn kp_local_error_is_third_order_on_oscillator() {
        let osc = ModelParams::harmonic();
        let local = |dt: f64| {
            let s = kp_step(
                &osc,
                ReducedState::new(1.0, 0.0),
                0.0,
                dt,
                0.0,
                0.0,
                NoiseMultiplier::Q,
            )
            .unwrap();
            (s.q - dt.cos()).hypot(s.p + dt.sin())
        };
        let ratio = local(0.02) / local(0.01);
        assert!((7.0..9.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn kp_frozen_drift_constant_noise() {
        let frozen = |_: ReducedState| ReducedState::default();
        let s = ReducedState::new(2.0, 0.5);
        let (dt, c) = (0.1, 0.3);
        let next = kp_step_with(frozen, s, dt, c, c, NoiseMultiplier::Q);
        // q is untouched, so both stages see the same factor q·c.
        assert_eq!(next.q, 2.0);
        assert_relative_eq!(next.p, 0.5 - dt * 2.0 * c, epsilon = 1e-15);
        // The p multiplier changes between stages: p* = p − dt·p·c.
        let next = kp_step_with(frozen, s, dt, c, c, NoiseMultiplier::P);
        let pred = 0.5 - dt * 0.5 * c;
        assert_relative_eq!(
            next.p,
            0.5 - 0.5 * dt * (0.5 * c + pred * c),
            epsilon = 1e-15
        );
    }

    #[test]
    fn kp_rejects_bad_step() {
        let p = ModelParams::standard();
        assert!(kp_step(
            &p,
            ReducedState::default(),
            0.0,
            0.0,
            0.0,
            0.0,
            NoiseMultiplier::Q
        )
        .is_err());
        assert!(kp_step(
            &p,
            ReducedState::new(1e300, 1e300),
            0.0,
            1e10,
            1e300,
            1e300,
            NoiseMultiplier::Q
        )
        .is_err());
    }
}
