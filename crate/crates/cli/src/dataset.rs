//! CSV and JSON emission.
//!
//! CSV files carry a header row, comma separators and LF line endings.
//! Floats are written with 17 significant digits (`1.2345678901234567e3`),
//! which parses back to the identical `f64`. Complex columns are split into
//! `<name>_re` and `<name>_im`; column names end in their unit (`_hz`,
//! `_s`, `_rad`) where one applies. Missing values are empty fields.

use std::path::Path;

use bkc_core::numerics::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A named table destined for `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: &str, columns: Vec<String>) -> Self {
        Table {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Pushes `re` and `im` cells of a complex value.
pub fn complex_cells(z: Complex64) -> [Cell; 2] {
    [Cell::Float(z.re), Cell::Float(z.im)]
}

/// Column pair for a complex quantity.
pub fn complex_columns(name: &str) -> [String; 2] {
    [format!("{name}_re"), format!("{name}_im")]
}

/// Reads a CSV written by [`Table::to_csv`] back into header and rows of strings.
pub fn read_csv(bytes: &[u8]) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::ReaderBuilder::new().from_reader(bytes);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    let header = r.headers().map_err(io)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(io)?;
    Ok((header, rows))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A rendered output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub bytes: Vec<u8>,
    /// Data rows for tables; `None` for JSON and text.
    pub rows: Option<usize>,
}

impl Artifact {
    pub fn table(t: &Table) -> Result<Self, CliError> {
        Ok(Artifact {
            file: format!("{}.csv", t.name),
            bytes: t.to_csv()?,
            rows: Some(t.rows.len()),
        })
    }

    pub fn json<T: Serialize>(name: &str, value: &T) -> Result<Self, CliError> {
        Ok(Artifact {
            file: format!("{name}.json"),
            bytes: to_json(value)?,
            rows: None,
        })
    }

    pub fn text(file: &str, text: String) -> Self {
        Artifact {
            file: file.into(),
            bytes: text.into_bytes(),
            rows: None,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(&self.file);
        std::fs::write(&path, &self.bytes)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}
