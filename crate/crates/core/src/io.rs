//! Output files: CSV tables with SI-suffixed headers, JSON reports and the
//! run manifest. Every file is written to a temporary sibling and renamed into
//! place.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.display().to_string(), source }
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(contents).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
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

/// Table with a mandatory header row. Floats are written with 17
/// significant digits so they round-trip exactly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Num(v) => write!(out, "{v:.16e}").unwrap(),
                    Cell::Int(v) => write!(out, "{v}").unwrap(),
                    Cell::Text(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        write_atomic(path, self.render().as_bytes())
    }

    /// Parses a CSV produced by [`CsvTable::render`] (or any simple CSV
    /// without quoting) into a header and numeric columns; non-numeric cells
    /// become NaN.
    pub fn read_numeric(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), IoError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| IoError::Format { path: path.display().to_string(), message: "empty file".into() })?
            .split(',')
            .map(|h| h.trim().to_string())
            .collect();
        let mut columns = vec![Vec::new(); header.len()];
        for (k, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(IoError::Format {
                    path: path.display().to_string(),
                    message: format!("row {} has {} cells, header has {}", k + 1, cells.len(), header.len()),
                });
            }
            for (col, cell) in columns.iter_mut().zip(cells) {
                col.push(cell.trim().parse::<f64>().unwrap_or(f64::NAN));
            }
        }
        Ok((header, columns))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| IoError::Format { path: path.display().to_string(), message: e.to_string() })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Provenance record written next to the outputs of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    /// s
    pub wall_time: f64,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            outputs: Vec::new(),
            wall_time: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let mut t = CsvTable::new(&["t_s", "size_m"]);
        let vals = [0.1 + 0.2, std::f64::consts::PI * 1e-7, -3.0e-300];
        for v in vals {
            t.push(vec![v.into(), (v * 2.0).into()]);
        }
        t.write(&path).unwrap();
        let (header, cols) = CsvTable::read_numeric(&path).unwrap();
        assert_eq!(header, vec!["t_s", "size_m"]);
        for (i, v) in vals.iter().enumerate() {
            assert_eq!(cols[0][i].to_bits(), v.to_bits());
        }
        assert!(std::fs::read_dir(dir.path()).unwrap().count() == 1);
    }

    #[test]
    #[should_panic]
    fn ragged_rows_are_rejected() {
        CsvTable::new(&["a", "b"]).push(vec![1.0.into()]);
    }
}
