//! CSV output of sweep reports.

use std::fs;
use std::path::Path;

use super::sweep::{SweepReport, SweepRow};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "variable,value,scheme,anmse_mean,anmse_std,mean_iterations,mean_wallclock_s";

/// Digits after the point in the scientific format; ten significant digits.
const MANTISSA_DIGITS: usize = 9;

fn format_float(x: f64) -> String {
    format!("{x:.MANTISSA_DIGITS$e}")
}

/// `x` rounded to the ten significant digits the CSV carries.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format_float(x).parse().unwrap_or(x)
}

/// The CSV text, header first, LF line endings.
pub fn to_csv_string(report: &SweepReport) -> String {
    let mut out = String::with_capacity(64 * (report.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let fields = [
            r.variable.to_string(),
            format_float(r.value),
            r.scheme.to_string(),
            format_float(r.anmse_mean),
            format_float(r.anmse_std),
            format_float(r.mean_iterations),
            format_float(r.mean_wallclock_s),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn emit_csv(report: &SweepReport, path: &Path) -> Result<()> {
    fs::write(path, to_csv_string(report)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("bad CSV header: {other:?}"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| parse_row(line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 2))))
        .collect()
}

fn parse_row(line: &str) -> Result<SweepRow> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 7 {
        return Err(Error::Parse(format!(
            "expected 7 fields, found {}",
            f.len()
        )));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
    };
    Ok(SweepRow {
        variable: f[0].parse()?,
        value: num(f[1])?,
        scheme: f[2].parse()?,
        anmse_mean: num(f[3])?,
        anmse_std: num(f[4])?,
        mean_iterations: num(f[5])?,
        mean_wallclock_s: num(f[6])?,
    })
}
