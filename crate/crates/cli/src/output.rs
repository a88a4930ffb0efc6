//! CSV tables, checksums and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::HarnessError;

/// Significant digits written for every float.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` to 12 significant digits: plain decimal notation for moderate
/// magnitudes, scientific otherwise, trailing zeros dropped.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exponent) = sci.split_once('e').expect("scientific notation");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let sign = if negative { "-" } else { "" };

    if !(-5..15).contains(&exponent) {
        let rest = digits[1..].trim_end_matches('0');
        return if rest.is_empty() {
            format!("{sign}{}e{exponent}", &digits[..1])
        } else {
            format!("{sign}{}.{rest}e{exponent}", &digits[..1])
        };
    }
    let (int_part, frac_part) = if exponent >= 0 {
        let split = exponent as usize + 1;
        if split >= digits.len() {
            (format!("{digits}{}", "0".repeat(split - digits.len())), String::new())
        } else {
            (digits[..split].to_string(), digits[split..].to_string())
        }
    } else {
        (
            "0".to_string(),
            format!("{}{digits}", "0".repeat((-exponent - 1) as usize)),
        )
    };
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Float(x) => out.push_str(&format_float(*x)),
            Cell::Int(n) => write!(out, "{n}").expect("write to string"),
            Cell::Text(s) => out.push_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// A table destined for `<name>.csv`. Column names carry their units in
/// brackets, e.g. `t [1/chi]`.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    body: String,
    rows: usize,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            body: String::new(),
            rows: 0,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                self.body.push(',');
            }
            cell.render(&mut self.body);
        }
        self.body.push('\n');
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> String {
        let mut text = self.columns.join(",");
        text.push('\n');
        text.push_str(&self.body);
        text
    }
}

/// Column name without its bracketed unit.
pub fn bare_column(name: &str) -> &str {
    name.split(" [").next().unwrap_or(name).trim()
}

/// Reads a CSV written by [`Table`] (or any plain comma-separated file
/// with a header row) into its header and rows of cells.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| HarnessError::Table {
            path: path.to_path_buf(),
            message: "empty table".into(),
        })?
        .split(',')
        .map(|c| c.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        if row.len() != header.len() {
            return Err(HarnessError::Table {
                path: path.to_path_buf(),
                message: format!("row {} has {} cells, header has {}", i + 2, row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub recipe: String,
    pub config: RunConfig,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputRecord>,
    /// Headline numbers of the run, for quick inspection.
    pub summary: serde_json::Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ERROR_FILE: &str = "error.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").expect("write to string");
            s
        })
}

/// Writes every table into `dir` and returns their records.
pub fn write_tables(dir: &Path, tables: &[Table]) -> Result<Vec<OutputRecord>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let stale = dir.join(ERROR_FILE);
    if stale.exists() {
        fs::remove_file(&stale).map_err(|e| HarnessError::io(&stale, e))?;
    }
    tables
        .iter()
        .map(|table| {
            let path = dir.join(table.file_name());
            let text = table.to_csv();
            fs::write(&path, &text).map_err(|e| HarnessError::io(&path, e))?;
            Ok(OutputRecord {
                file: table.file_name(),
                sha256: sha256_hex(text.as_bytes()),
                bytes: text.len(),
                rows: table.rows(),
            })
        })
        .collect()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_float(-2.0 / 3.0), "-0.666666666667");
        assert_eq!(format_float(10000.0), "10000");
        assert_eq!(format_float(123456.789012345), "123456.789012");
        assert_eq!(format_float(2.45e-3), "0.00245");
        assert_eq!(format_float(1.5e-7), "1.5e-7");
        assert_eq!(format_float(6.02214076e23), "6.02214076e23");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(9.9999999999999), "10");
    }

    #[test]
    fn formatted_values_round_trip_to_twelve_digits() {
        for &x in &[std::f64::consts::PI, 1.0e-4 / 7.0, 98765.4321e3, -0.000123456789012345] {
            let back: f64 = format_float(x).parse().unwrap();
            assert!((back - x).abs() <= 1e-11 * x.abs(), "{x} -> {back}");
        }
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new("demo", &["N [photons]", "F [1]", "series"]);
        t.push(vec![100u64.into(), 0.5.into(), "L1".into()]);
        assert_eq!(t.to_csv(), "N [photons],F [1],series\n100,0.5,L1\n");
        assert_eq!(bare_column("N [photons]"), "N");
    }

    #[test]
    fn checksum_is_hex_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
