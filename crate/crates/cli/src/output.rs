//! Plot-ready files. Numbers are written in the shortest decimal form that
//! parses back to the same `f64`, so every file round-trips exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use liquidation_core::Trajectory;

use crate::error::CliError;

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "I", "A", "X", "Y", "u", "zeta"];

/// Shortest round-trip decimal; exponent notation only for extreme
/// magnitudes.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// A parsed CSV file with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }

    pub fn column_named(&self, name: &str) -> Option<Vec<f64>> {
        self.header.iter().position(|h| h == name).map(|k| self.column(k))
    }
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// Writes `header` and numeric `rows`.
pub fn write_numeric_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| fmt_f64(*x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory(path: &Path, tr: &Trajectory) -> Result<(), CliError> {
    let nodes = tr.grid.nodes();
    write_numeric_csv(
        path,
        &TRAJECTORY_HEADER,
        (0..nodes.len()).map(|k| vec![nodes[k], tr.rate[k], tr.cumulative[k], tr.x[k], tr.y[k], tr.u[k], tr.zeta[k]]),
    )
}

pub fn write_text(path: &Path, lines: &[String]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?);
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}
