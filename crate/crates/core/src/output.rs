//! Plain-text result files. Every float is printed with 9 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

const SIG_DIGITS: usize = 9;

/// `%.9g`-style formatting: 9 significant digits, trailing zeros trimmed,
/// scientific notation outside `1e-5 ..= 1e9`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG_DIGITS as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes a header and rows of floats.
pub fn write_table<W: Write>(
    mut w: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_sig).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a flat JSON object of numeric fields, in the given order.
pub fn write_flat_json<W: Write>(mut w: W, fields: &[(&str, f64)]) -> Result<()> {
    writeln!(w, "{{")?;
    for (i, (k, v)) in fields.iter().enumerate() {
        let sep = if i + 1 == fields.len() { "" } else { "," };
        writeln!(w, "  \"{k}\": {}{sep}", fmt_sig(*v))?;
    }
    writeln!(w, "}}")?;
    w.flush()?;
    Ok(())
}

/// The persisted scalar part of a noise fit.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct FitRecord {
    pub beta0: f64,
    pub d: f64,
    pub fit_step: f64,
    pub tau0: f64,
    #[serde(default)]
    pub zero_fraction: f64,
}

pub fn read_fit_record(path: &Path) -> Result<FitRecord> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.1967), "0.1967");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(-2.5), "-2.5");
        assert_eq!(fmt_sig(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt_sig(123456789.4), "123456789");
        assert_eq!(fmt_sig(1234567890.0), "1.23456789e9");
        assert_eq!(fmt_sig(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig(0.00012345678912), "0.000123456789");
        assert_eq!(fmt_sig(20.0), "20");
        assert_eq!(fmt_sig(0.05 * 3.0), "0.15");
    }

    #[test]
    fn flat_json_round_trip() {
        let mut buf = Vec::new();
        write_flat_json(
            &mut buf,
            &[
                ("beta0", 0.1008),
                ("d", 0.902),
                ("fit_step", 0.05),
                ("tau0", 0.52),
            ],
        )
        .unwrap();
        let rec: FitRecord = serde_json::from_slice(&buf).unwrap();
        assert_eq!(rec.d, 0.902);
        assert_eq!(rec.zero_fraction, 0.0);
    }
}
