//! CSV and JSON writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::hamiltonian::DiscreteState;

/// A number with 17 significant digits; `NaN` becomes an empty cell.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

/// In-memory CSV table, written in one go.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Output directory for one run.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_table(&self, name: &str, table: &Table) -> Result<PathBuf> {
        let p = self.path(name);
        table.write(&p)?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.path(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(&p, text + "\n")?;
        Ok(p)
    }
}

/// Node coordinates with `m` and `u`.
pub fn state_table(grid: &TorusGrid, state: &DiscreteState) -> Table {
    let mut t = if grid.dim() == 1 {
        Table::new(&["x", "m", "u"])
    } else {
        Table::new(&["x1", "x2", "m", "u"])
    };
    for i in 0..grid.len() {
        let x = grid.point(i);
        let mut row: Vec<String> = x[..grid.dim()].iter().map(|v| num(*v)).collect();
        row.push(num(state.m[i]));
        row.push(num(state.u[i]));
        t.push(row);
    }
    t
}

/// `summary.json`: the fields every experiment reports.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub preset: String,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    pub k: f64,
    /// Total node count.
    #[serde(rename = "N")]
    pub n: usize,
    pub n_per_dim: usize,
    pub method: String,
    /// Approximate effective Hamiltonian `H~^k`.
    pub hbar: Option<f64>,
    pub mass_drift: Option<f64>,
    pub min_density: Option<f64>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar_newton: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar_hrf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    pub wall_seconds: f64,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}
