//! Plain-text matrix serialization.
//!
//! Format: one header line `rows cols`, then one whitespace-separated row per
//! line. Values are written with 17 significant digits so `f64` round-trips
//! are exact.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix(out: &mut String, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_f64(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

pub fn matrix_to_string(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    write_matrix(&mut s, m);
    s
}

/// Reads one matrix from the line iterator, consuming exactly `1 + rows` lines.
pub fn read_matrix<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<DMatrix<f64>> {
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing matrix header line".into()))?;
    let mut parts = header.split_whitespace();
    let rows: usize = parse_field(parts.next(), "matrix rows")?;
    let cols: usize = parse_field(parts.next(), "matrix cols")?;
    if parts.next().is_some() {
        return Err(Error::Parse(format!("trailing tokens in header: {header:?}")));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing matrix row {i}")))?;
        let mut n = 0usize;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad float {tok:?} in row {i}")))?;
            data.push(v);
            n += 1;
        }
        if n != cols {
            return Err(Error::Parse(format!(
                "row {i} has {n} entries, expected {cols}"
            )));
        }
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn matrix_from_string(s: &str) -> Result<DMatrix<f64>> {
    let mut lines = s.lines();
    let m = read_matrix(&mut lines)?;
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::Parse("trailing content after matrix".into()));
    }
    Ok(m)
}

fn parse_field(tok: Option<&str>, what: &str) -> Result<usize> {
    tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}")))
}
