//! CSV and JSON output. Floats are written with 17 significant digits so
//! that reruns reproduce files byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::ExperimentReport;
use crate::rmt::SpectrumSample;
use crate::subordination::DensityPoint;

/// One CSV field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Bool(bool),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Int(v) => write!(out, "{v}"),
            Cell::Float(v) => write!(out, "{v:.16e}"),
            Cell::Bool(v) => write!(out, "{v}"),
        }
        .expect("writing to a String");
    }
}

/// Renders a header row and data rows.
pub fn csv_string(header: &[&str], rows: &[Vec<Cell>]) -> Result<String> {
    let mut out = header.join(",");
    out.push('\n');
    for (k, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "csv row {k} has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        for (j, c) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            c.render(&mut out);
        }
        out.push('\n');
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    write_file(path, &csv_string(header, rows)?)
}

/// Pretty-printed JSON; keys follow the struct field order.
pub fn json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &json_string(value)?)
}

pub fn density_rows(points: &[DensityPoint]) -> Vec<Vec<Cell>> {
    points
        .iter()
        .map(|p| {
            vec![
                Cell::Float(p.e),
                Cell::Float(p.rho),
                Cell::Float(p.residual),
                Cell::Int(p.iterations as u64),
                Cell::Bool(p.converged),
            ]
        })
        .collect()
}

pub const DENSITY_HEADER: [&str; 5] = ["E", "rho", "residual", "iterations", "converged"];

pub fn write_density_csv(path: &Path, points: &[DensityPoint]) -> Result<()> {
    write_csv(path, &DENSITY_HEADER, &density_rows(points))
}

/// `(s, F₂(s))` table.
pub fn write_tw_csv(path: &Path, table: &[(f64, f64)]) -> Result<()> {
    let rows: Vec<_> = table.iter().map(|&(s, f)| vec![Cell::Float(s), Cell::Float(f)]).collect();
    write_csv(path, &["s", "F2"], &rows)
}

/// `sample_index, seed, lambda_1, …, lambda_k` per sample.
pub fn write_spectra_csv(path: &Path, samples: &[SpectrumSample], k: usize) -> Result<()> {
    if let Some(s) = samples.iter().find(|s| s.eigenvalues.len() < k) {
        return Err(Error::InvalidInput(format!(
            "sample {} has {} eigenvalues, asked for {k}",
            s.stream,
            s.eigenvalues.len()
        )));
    }
    let names: Vec<String> = (1..=k).map(|i| format!("lambda_{i}")).collect();
    let mut header = vec!["sample_index", "seed"];
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<_> = samples
        .iter()
        .map(|s| {
            let mut r = vec![Cell::Int(s.stream), Cell::Int(s.seed)];
            r.extend(s.eigenvalues[..k].iter().map(|&x| Cell::Float(x)));
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Per-sample values of a report.
pub fn write_samples_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let rows: Vec<_> = report
        .samples
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![Cell::Int(i as u64), Cell::Float(v)])
        .collect();
    write_csv(path, &["sample_index", "value"], &rows)
}
