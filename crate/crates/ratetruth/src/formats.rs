//! CSV file formats. Every file this crate writes starts with `#` comment
//! lines carrying the resolved configuration as one-line JSON; readers skip
//! them.
//!
//! - distribution: header `x,p`, one row per grid point.
//! - matrix (channel, semantic channel, distortion, joint): header
//!   `x,<label 1>,…,<label n>`, then `x_i, v_i1, …, v_in`.
//! - curve: header `s,rate_bits,constraint_value,iterations,converged`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ratetruth_core::solver::SweepPoint;
use ratetruth_core::Distribution;
use serde_json::Value;

use crate::error::{CliError, Result};

/// A labelled matrix read from or written to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub xs: Vec<f64>,
    pub labels: Vec<String>,
    /// One row per `x`.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn row_major(&self) -> Vec<f64> {
        self.rows.concat()
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn number(path: &Path, line: u64, field: &str) -> Result<f64> {
    let v = match field {
        "inf" | "+inf" | "Infinity" => f64::INFINITY,
        "-inf" | "-Infinity" => f64::NEG_INFINITY,
        _ => field
            .parse::<f64>()
            .map_err(|_| CliError::format(path, format!("line {line}: `{field}` is not a number")))?,
    };
    if v.is_nan() {
        return Err(CliError::format(path, format!("line {line}: NaN is not allowed")));
    }
    Ok(v)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::format(path, e)
}

/// Reads a distribution CSV. Probabilities must already sum to one.
pub fn read_distribution(path: &Path) -> Result<(Vec<f64>, Distribution)> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "p" {
        return Err(CliError::format(path, "distribution header must be `x,p`"));
    }
    let (mut xs, mut ps) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        xs.push(number(path, line, &rec[0])?);
        ps.push(number(path, line, &rec[1])?);
    }
    let dist = Distribution::new(ps).map_err(|e| CliError::format(path, e))?;
    Ok((xs, dist))
}

/// Reads a matrix CSV. The first header cell must be `x`.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 || &headers[0] != "x" {
        return Err(CliError::format(path, "header must be `x,<label>,...` with at least one label"));
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let (mut xs, mut rows) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        xs.push(number(path, line, &rec[0])?);
        let row = rec.iter().skip(1).map(|f| number(path, line, f)).collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::format(path, "no data rows"));
    }
    Ok(Table { xs, labels, rows })
}

/// `# config {...}` followed by a newline, or nothing.
fn comment(config: Option<&Value>) -> String {
    match config {
        Some(c) => format!("# config {c}\n"),
        None => String::new(),
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        // shortest round-trip digits either way; exponent form keeps tiny
        // values short
        format!("{v:e}")
    }
}

fn write_string(path: &Path, s: &str) -> Result<()> {
    std::fs::write(path, s).map_err(|e| CliError::io(path, e))
}

pub fn distribution_csv(config: Option<&Value>, xs: &[f64], dist: &Distribution) -> String {
    let mut s = comment(config);
    s.push_str("x,p\n");
    for (x, p) in xs.iter().zip(dist.probs()) {
        s.push_str(&format!("{},{}\n", fmt_num(*x), fmt_num(*p)));
    }
    s
}

fn quote(label: &str) -> String {
    if label.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", label.replace('"', "\"\""))
    } else {
        label.to_string()
    }
}

pub fn table_csv(config: Option<&Value>, table: &Table) -> String {
    let mut s = comment(config);
    s.push('x');
    for l in &table.labels {
        s.push(',');
        s.push_str(&quote(l));
    }
    s.push('\n');
    for (x, row) in table.xs.iter().zip(&table.rows) {
        s.push_str(&fmt_num(*x));
        for v in row {
            s.push(',');
            s.push_str(&fmt_num(*v));
        }
        s.push('\n');
    }
    s
}

/// Failed points are written as `nan` with `converged = false`.
pub fn curve_csv(config: Option<&Value>, points: &[SweepPoint]) -> String {
    let mut s = comment(config);
    s.push_str("s,rate_bits,constraint_value,iterations,converged\n");
    for p in points {
        match &p.outcome {
            Ok(r) => s.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_num(p.s),
                fmt_num(r.rate_bits.0),
                fmt_num(r.constraint_value),
                r.iterations,
                r.converged
            )),
            Err(_) => s.push_str(&format!("{},nan,nan,0,false\n", fmt_num(p.s))),
        }
    }
    s
}

pub fn write_distribution(path: &Path, config: Option<&Value>, xs: &[f64], dist: &Distribution) -> Result<()> {
    write_string(path, &distribution_csv(config, xs, dist))
}

pub fn write_table(path: &Path, config: Option<&Value>, table: &Table) -> Result<()> {
    write_string(path, &table_csv(config, table))
}

pub fn write_curve(path: &Path, config: Option<&Value>, points: &[SweepPoint]) -> Result<()> {
    write_string(path, &curve_csv(config, points))
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::format(path, e))?;
    f.write_all(b"\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
}
