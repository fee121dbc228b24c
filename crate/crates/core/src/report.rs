//! Result files written by the experiments. Column layouts are fixed; the
//! figure scripts read them by name.

use std::io::Write;
use std::path::Path;

use crate::analysis::{CovarianceCurve, NoiseFit, PersistenceSample};
use crate::error::Result;
use crate::experiments::{EnsembleResult, HistogramComparison, PhaseTrace};
use crate::output::{create, fmt_sig, write_flat_json, write_table};

pub const COVARIANCE_CSV: &str = "covariance.csv";
pub const PERSISTENCE_CSV: &str = "persistence.csv";
pub const LOG_A_HIST_CSV: &str = "log_a_hist.csv";
pub const FIT_JSON: &str = "fit.json";
pub const ERGODICITY_CSV: &str = "ergodicity.csv";
pub const TRUTH_CSV: &str = "truth.csv";
pub const TMODEL_CSV: &str = "tmodel.csv";
pub const EXPECTATIONS_CSV: &str = "expectations.csv";
pub const Q_HIST_CSV: &str = "q_hist.csv";

pub fn write_covariance(dir: &Path, curve: &CovarianceCurve) -> Result<()> {
    let rows = curve
        .lags()
        .enumerate()
        .map(|(l, tau)| vec![tau, curve.c[l], curve.c_star[l], curve.beta[l]]);
    write_table(
        create(&dir.join(COVARIANCE_CSV))?,
        &["tau", "C", "Cstar", "beta"],
        rows,
    )
}

pub fn write_persistence(dir: &Path, samples: &[PersistenceSample]) -> Result<()> {
    let mut w = create(&dir.join(PERSISTENCE_CSV))?;
    writeln!(w, "trajectory_id,a,log_a")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{}",
            s.trajectory_id,
            fmt_sig(s.a),
            fmt_sig(s.a.ln())
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `fit.json` and `log_a_hist.csv`.
pub fn write_fit(dir: &Path, fit: &NoiseFit) -> Result<()> {
    write_flat_json(
        create(&dir.join(FIT_JSON))?,
        &[
            ("beta0", fit.beta0),
            ("d", fit.d),
            ("fit_step", fit.fit_step),
            ("tau0", fit.tau0),
            ("zero_fraction", fit.zero_fraction),
        ],
    )?;
    let mut w = create(&dir.join(LOG_A_HIST_CSV))?;
    fit.log_a_hist.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads a fit back from `fit.json` and `log_a_hist.csv`.
pub fn read_fit(dir: &Path) -> Result<NoiseFit> {
    let rec = crate::output::read_fit_record(&dir.join(FIT_JSON))?;
    let hist_path = dir.join(LOG_A_HIST_CSV);
    let file = std::io::BufReader::new(std::fs::File::open(&hist_path)?);
    let log_a_hist =
        crate::sampling::EmpiricalHistogram::read_csv(file, &hist_path.display().to_string())?;
    let fit = NoiseFit {
        beta0: rec.beta0,
        d: rec.d,
        fit_step: rec.fit_step,
        tau0: rec.tau0,
        log_a_hist,
        zero_fraction: rec.zero_fraction,
    };
    fit.validate()?;
    Ok(fit)
}

pub fn write_ergodicity(dir: &Path, trace: &PhaseTrace) -> Result<()> {
    let rows = (0..trace.times.len()).map(|j| vec![trace.times[j], trace.q[j], trace.p[j]]);
    write_table(create(&dir.join(ERGODICITY_CSV))?, &["t", "q", "p"], rows)
}

pub fn write_truth(dir: &Path, r: &EnsembleResult) -> Result<()> {
    let rows = (0..r.times.len()).map(|j| vec![r.times[j], r.mean_q[j], r.mean_p[j], r.var_q[j]]);
    write_table(
        create(&dir.join(TRUTH_CSV))?,
        &["t", "mean_q", "mean_p", "var_q"],
        rows,
    )
}

pub fn write_tmodel(dir: &Path, trace: &PhaseTrace) -> Result<()> {
    let rows = (0..trace.times.len())
        .map(|j| vec![trace.times[j], trace.q[j], trace.p[j], trace.energy[j]]);
    write_table(
        create(&dir.join(TMODEL_CSV))?,
        &["t", "Q", "P", "H_reduced"],
        rows,
    )
}

pub fn write_expectations(
    dir: &Path,
    truth: &EnsembleResult,
    tmodel: &PhaseTrace,
    noise: &EnsembleResult,
) -> Result<()> {
    let rows = (0..truth.times.len()).map(|j| {
        vec![
            truth.times[j],
            truth.mean_q[j],
            truth.mean_p[j],
            tmodel.q[j],
            noise.mean_q[j],
        ]
    });
    write_table(
        create(&dir.join(EXPECTATIONS_CSV))?,
        &[
            "t",
            "mean_q_truth",
            "mean_p_truth",
            "mean_q_tmodel",
            "mean_q_noise",
        ],
        rows,
    )
}

pub fn write_q_hist(dir: &Path, cmp: &HistogramComparison) -> Result<()> {
    let mut w = create(&dir.join(Q_HIST_CSV))?;
    writeln!(w, "bin_left,bin_right,count_truth,count_model")?;
    let edges = cmp.truth.bin_edges();
    for (i, (ct, cm)) in cmp
        .truth
        .counts()
        .iter()
        .zip(cmp.model.counts())
        .enumerate()
    {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_sig(edges[i]),
            fmt_sig(edges[i + 1]),
            ct,
            cm
        )?;
    }
    w.flush()?;
    Ok(())
}
