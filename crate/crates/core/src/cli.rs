//! Command-line front end: one subcommand per experiment.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;

use crate::config::load_config;
use crate::error::Result;
use crate::experiments::{
    calibrate_noise, histogram_compare, l2_distance, run_ergodicity_trace,
    run_noise_model_ensemble, run_tmodel, run_truth_expectations, split_half_ks, Calibration,
    EnsembleResult, ExperimentConfig, PhaseTrace,
};
use crate::output::fmt_sig;
use crate::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// One long full-system trajectory in the (q, p) plane.
    Ergodicity,
    /// Conditional expectations from the full system.
    Truth,
    /// The t-model trajectory.
    Tmodel,
    /// Covariance analysis and AR(1)-plus-persistence fit of the noise.
    Calibrate,
    /// Calibrate, then compare noise-model, t-model and truth means.
    NoiseSim,
    /// Calibrate, then compare q histograms of truth and noise model.
    Histogram,
    /// Every experiment, in pipeline order.
    All,
}

#[derive(Debug, Parser)]
#[command(
    name = "mzlab",
    version,
    about = "Noise calibration for an underresolved Hamiltonian heat bath"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file; model-problem defaults when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "results")]
    out: PathBuf,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    samples: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliInvocation {
    pub command: Command,
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub samples_override: Option<u64>,
}

pub fn parse_args<I, T>(argv: I) -> std::result::Result<CliInvocation, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    Ok(CliInvocation {
        command: cli.command,
        config_path: cli.config,
        out_dir: cli.out,
        seed_override: cli.seed,
        samples_override: cli.samples,
    })
}

impl CliInvocation {
    pub fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config_path {
            Some(p) => load_config(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed_override {
            cfg.seed = seed;
        }
        if let Some(n) = self.samples_override {
            cfg.n_samples = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Ordered `key=value` pairs for the final stdout line.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Summary(pub Vec<(&'static str, f64)>);

impl Summary {
    fn push(&mut self, key: &'static str, v: f64) {
        self.0.push((key, v));
    }

    pub fn line(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={}", fmt_sig(*v)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Computes each experiment at most once per invocation.
struct Session<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    summary: Summary,
    calibration: Option<Calibration>,
    truth: Option<EnsembleResult>,
    tmodel: Option<PhaseTrace>,
    noise: Option<EnsembleResult>,
}

impl<'a> Session<'a> {
    fn ergodicity(&mut self) -> Result<()> {
        info!("ergodicity trace to t = {}", self.cfg.ergodicity_horizon);
        let trace = run_ergodicity_trace(self.cfg)?;
        report::write_ergodicity(self.out, &trace)?;
        self.summary.push("min_r2", trace.min_radius_sq());
        self.summary
            .push("energy_drift", trace.relative_energy_drift());
        Ok(())
    }

    fn calibration(&mut self) -> Result<&Calibration> {
        if self.calibration.is_none() {
            info!("calibrating noise over {} trajectories", self.cfg.n_samples);
            let cal = calibrate_noise(self.cfg)?;
            report::write_covariance(self.out, &cal.curve)?;
            report::write_persistence(self.out, &cal.persistence)?;
            report::write_fit(self.out, &cal.fit)?;
            self.summary.push("C0", cal.curve.c[0]);
            self.summary.push("Cstar_end", cal.c_star_tail);
            self.summary.push("A", cal.a_mean);
            self.summary.push("beta0", cal.fit.beta0);
            self.summary.push("d", cal.fit.d);
            self.calibration = Some(cal);
        }
        Ok(self.calibration.as_ref().expect("set above"))
    }

    fn truth(&mut self) -> Result<&EnsembleResult> {
        if self.truth.is_none() {
            info!("truth ensemble of {} trajectories", self.cfg.n_samples);
            let truth = run_truth_expectations(self.cfg)?;
            report::write_truth(self.out, &truth)?;
            self.truth = Some(truth);
        }
        Ok(self.truth.as_ref().expect("set above"))
    }

    fn tmodel(&mut self) -> Result<&PhaseTrace> {
        if self.tmodel.is_none() {
            let trace = run_tmodel(self.cfg)?;
            report::write_tmodel(self.out, &trace)?;
            self.tmodel = Some(trace);
        }
        Ok(self.tmodel.as_ref().expect("set above"))
    }

    fn noise(&mut self) -> Result<&EnsembleResult> {
        if self.noise.is_none() {
            let fit = self.calibration()?.fit.clone();
            info!("noise-model ensemble of {} paths", self.cfg.n_samples);
            self.noise = Some(run_noise_model_ensemble(self.cfg, &fit)?);
        }
        Ok(self.noise.as_ref().expect("set above"))
    }

    fn noise_sim(&mut self) -> Result<()> {
        self.noise()?;
        self.truth()?;
        self.tmodel()?;
        let (truth, tmodel, noise) = (
            self.truth.as_ref().expect("computed"),
            self.tmodel.as_ref().expect("computed"),
            self.noise.as_ref().expect("computed"),
        );
        report::write_expectations(self.out, truth, tmodel, noise)?;
        let l2_noise = l2_distance(&noise.mean_q, &truth.mean_q, self.cfg.dt_full);
        let l2_tmodel = l2_distance(&tmodel.q, &truth.mean_q, self.cfg.dt_full);
        self.summary.push("l2_noise", l2_noise);
        self.summary.push("l2_tmodel", l2_tmodel);
        Ok(())
    }

    fn histogram(&mut self) -> Result<()> {
        self.noise()?;
        self.truth()?;
        let (truth, noise) = (
            self.truth.as_ref().expect("computed"),
            self.noise.as_ref().expect("computed"),
        );
        let cmp = histogram_compare(
            &truth.endpoint_q,
            &noise.endpoint_q,
            self.cfg.histogram_bins,
        )?;
        report::write_q_hist(self.out, &cmp)?;
        let baseline = split_half_ks(&truth.endpoint_q)?;
        self.summary.push("ks", cmp.ks);
        self.summary.push("ks_baseline", baseline);
        Ok(())
    }
}

/// Runs the invocation, writing result files under `out_dir`.
pub fn run(inv: &CliInvocation) -> Result<Summary> {
    let cfg = inv.config()?;
    std::fs::create_dir_all(&inv.out_dir)?;
    let mut s = Session {
        cfg: &cfg,
        out: &inv.out_dir,
        summary: Summary::default(),
        calibration: None,
        truth: None,
        tmodel: None,
        noise: None,
    };
    match inv.command {
        Command::Ergodicity => s.ergodicity()?,
        Command::Truth => {
            s.truth()?;
        }
        Command::Tmodel => {
            s.tmodel()?;
        }
        Command::Calibrate => {
            s.calibration()?;
        }
        Command::NoiseSim => s.noise_sim()?,
        Command::Histogram => s.histogram()?,
        Command::All => {
            s.ergodicity()?;
            s.calibration()?;
            s.noise_sim()?;
            s.histogram()?;
        }
    }
    Ok(s.summary)
}
