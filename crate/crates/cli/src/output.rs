use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use locindex::BandwidthMethod;

pub const DECIMALS: usize = 6;

pub fn fixed(v: f64) -> String {
    format!("{v:.DECIMALS$}")
}

pub fn method_name(m: BandwidthMethod) -> &'static str {
    match m {
        BandwidthMethod::Dpi => "dpi",
        BandwidthMethod::MedianAdjusted => "median_adjusted",
        BandwidthMethod::Fixed => "fixed",
    }
}

/// Space-aligned table: first column left-aligned, the rest right-aligned.
pub fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (k, cell) in row.iter().enumerate().take(cols) {
            if k == 0 {
                write!(out, "{cell:<w$}", w = widths[0]).unwrap();
            } else {
                write!(out, "  {cell:>w$}", w = widths[k]).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn csv(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes whitespace-separated columns, one point per line.
pub fn write_dat(
    dir: &Path,
    name: &str,
    header: &str,
    points: impl Iterator<Item = (f64, f64)>,
) -> Result<PathBuf> {
    let mut text = format!("# {header}\n");
    for (a, b) in points {
        writeln!(text, "{} {}", fixed(a), fixed(b)).unwrap();
    }
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Both corners of every piece, so that the file plots as a staircase.
pub fn step_points(taus: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
    let m = taus.len() as f64;
    taus.iter()
        .enumerate()
        .flat_map(move |(i, &v)| [(i as f64 / m, v), ((i + 1) as f64 / m, v)])
}
