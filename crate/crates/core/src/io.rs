//! CSV ingestion and the `qsurface.csv` format.
//!
//! Input files are comma separated with an optional header row. The first
//! row is a header when any of its fields fails to parse as a number.
//!
//! `qsurface.csv` has `d + 1` rows of `d` fields: the grid points, then one
//! row of `q̄ₙ` values per first-coordinate grid point. Numbers are written
//! in scientific notation with 17 significant digits, which round-trips
//! every `f64`.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::dependence::QSurface;
use crate::error::{QdepError, Result};
use crate::ranks::Sample;

/// Column selector: one-based position or header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for Column {
    type Err = QdepError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.parse::<usize>() {
            Ok(0) => Err(QdepError::Input("column indices start at 1".into())),
            Ok(i) => Ok(Column::Index(i)),
            Err(_) if !s.is_empty() => Ok(Column::Name(s.to_string())),
            Err(_) => Err(QdepError::Input("empty column selector".into())),
        }
    }
}

/// Parses `1,3` or `x,y` into selectors.
pub fn parse_columns(spec: &str) -> Result<Vec<Column>> {
    spec.split(',').map(str::parse).collect()
}

fn parse_number(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok()
}

/// Reads a numeric table and keeps the selected columns (default: the first
/// two).
pub fn parse_sample(text: &str, cols: Option<&[Column]>) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| QdepError::Input(format!("malformed CSV: {e}")))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(rec);
    }
    let first = rows
        .first()
        .ok_or_else(|| QdepError::Input("input has no rows".into()))?;
    let header: Option<Vec<String>> = if first.iter().any(|f| parse_number(f).is_none()) {
        Some(first.iter().map(str::to_string).collect())
    } else {
        None
    };
    let body = &rows[header.is_some() as usize..];
    let width = header.as_ref().map_or(first.len(), Vec::len);
    if width < 2 {
        return Err(QdepError::Input(format!("need at least 2 columns, found {width}")));
    }

    let default = [Column::Index(1), Column::Index(2)];
    let selected: Vec<usize> = cols
        .unwrap_or(&default)
        .iter()
        .map(|c| match c {
            Column::Index(i) if *i <= width => Ok(i - 1),
            Column::Index(i) => Err(QdepError::Input(format!(
                "column {i} requested but the input has {width} columns"
            ))),
            Column::Name(name) => header
                .as_ref()
                .and_then(|h| h.iter().position(|x| x == name))
                .ok_or_else(|| QdepError::Input(format!("no column named '{name}'"))),
        })
        .collect::<Result<_>>()?;
    if selected.len() < 2 {
        return Err(QdepError::Input("select at least 2 columns".into()));
    }

    let line0 = 1 + header.is_some() as usize;
    let mut columns = vec![Vec::with_capacity(body.len()); selected.len()];
    for (i, rec) in body.iter().enumerate() {
        if rec.len() != width {
            return Err(QdepError::Input(format!(
                "row {} has {} fields, expected {width}",
                line0 + i,
                rec.len()
            )));
        }
        for (out, &c) in columns.iter_mut().zip(&selected) {
            let field = &rec[c];
            let x = parse_number(field).ok_or_else(|| {
                QdepError::Input(format!("row {}, column {}: '{field}' is not a number", line0 + i, c + 1))
            })?;
            out.push(x);
        }
    }
    let labels = header.map(|h| selected.iter().map(|&c| h[c].clone()).collect());
    Sample::with_labels(columns, labels)
}

pub fn read_sample(path: &Path, cols: Option<&[Column]>) -> Result<Sample> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| QdepError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_sample(&text, cols)
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn join_row(xs: impl Iterator<Item = f64>) -> String {
    xs.map(format_float).collect::<Vec<_>>().join(",")
}

pub fn qsurface_csv(surface: &QSurface) -> String {
    let mut out = join_row(surface.grid().points().into_iter());
    out.push('\n');
    for j in 0..surface.size() {
        out.push_str(&join_row(surface.row(j).iter().copied()));
        out.push('\n');
    }
    out
}

/// Parses `qsurface.csv` into grid points and the row-major matrix.
pub fn parse_qsurface_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let parse_row = |line: &str| -> Result<Vec<f64>> {
        line.split(',')
            .map(|f| parse_number(f).ok_or_else(|| QdepError::Input(format!("'{f}' is not a number"))))
            .collect()
    };
    let points = parse_row(
        lines
            .next()
            .ok_or_else(|| QdepError::Input("empty surface file".into()))?,
    )?;
    let d = points.len();
    let mut values = Vec::with_capacity(d * d);
    let mut rows = 0;
    for line in lines {
        let row = parse_row(line)?;
        if row.len() != d {
            return Err(QdepError::Input(format!("surface row has {} values, expected {d}", row.len())));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != d {
        return Err(QdepError::Input(format!("surface has {rows} rows, expected {d}")));
    }
    Ok((points, values))
}
