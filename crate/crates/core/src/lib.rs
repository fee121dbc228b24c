//! Quantifying the noise of an underresolved Hamiltonian heat-bath model.
//!
//! A tagged particle coupled to `m` fast oscillators is reduced to its
//! conditional-mean dynamics. The discarded force, the noise, is measured
//! from full-system ensembles, fitted by an AR(1) series plus a persistent
//! per-trajectory offset, and fed back into the reduced system to check that
//! it reproduces the decay of conditional expectations.
//!
//! Modules, bottom-up:
//! - [`model`]: vector fields, energies and the exact noise
//! - [`sampling`]: seeded canonical-density sampling and histograms
//! - [`integrators`]: RK4 and the Klauder-Petersen predictor-corrector
//! - [`analysis`]: covariance estimation, decomposition and AR(1) fit
//! - [`generator`]: sample paths of the fitted noise
//! - [`experiments`]: ensemble runs, trajectory-parallel via [`exec`]
//! - [`config`], [`report`], [`cli`]: files and the command line

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod generator;
pub mod integrators;
pub mod model;
pub mod output;
pub mod report;
pub mod sampling;

pub use error::{Error, Result};
pub use exec::Execution;
pub use experiments::ExperimentConfig;
pub use model::{FullState, ModelParams, NoiseMultiplier, ReducedState};
