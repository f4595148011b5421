//! Report files: one CSV per table with `#` provenance lines, a JSON-lines
//! run log that starts with the config echo, and per-grid density dumps.
//!
//! Every write goes to a temporary sibling and is renamed into place. Output
//! bytes depend only on the values, so identical runs hash identically.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::predictive::PredictiveGrid;

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Real(f64),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Real(v) => format_real(*v),
        }
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

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

/// Shortest round-trip representation; `nan`/`inf` spelled out.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub provenance: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            provenance: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn note(mut self, line: impl Into<String>) -> Self {
        self.provenance.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut out = String::new();
        for line in &self.provenance {
            let _ = writeln!(out, "# {line}");
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let body = w.into_inner().map_err(|e| e.into_error())?;
        let mut bytes = out.into_bytes();
        bytes.extend(body);
        Ok(bytes)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        write_atomic(&path, &self.to_csv()?)?;
        Ok(path)
    }
}

/// `y,log_density,density` rows of a grid.
pub fn grid_csv(grid: &PredictiveGrid) -> Vec<u8> {
    let mut out = String::from("y,log_density,density\n");
    for (y, l) in grid.y_values().iter().zip(grid.log_density()) {
        let _ = writeln!(out, "{},{},{}", format_real(*y), format_real(*l), format_real(l.exp()));
    }
    out.into_bytes()
}

pub fn write_grid(path: &Path, grid: &PredictiveGrid) -> Result<()> {
    write_atomic(path, &grid_csv(grid))
}

/// JSON-lines log: the first record is the resolved configuration.
#[derive(Debug, Default)]
pub struct JsonLog {
    lines: Vec<String>,
}

impl JsonLog {
    pub fn with_config<C: Serialize>(config: &C) -> Result<Self> {
        let mut log = Self::default();
        log.record(&serde_json::json!({ "record": "config", "config": config }))?;
        Ok(log)
    }

    pub fn record<T: Serialize>(&mut self, value: &T) -> Result<()> {
        self.lines.push(serde_json::to_string(value)?);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = self.lines.join("\n");
        s.push('\n');
        write_atomic(path, s.as_bytes())
    }
}
