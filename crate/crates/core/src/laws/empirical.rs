//! Coefficients read from a two-column CSV file.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Coefficients;
use crate::error::{Error, Result};

/// How rows are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmpiricalMode {
    /// Uniformly with replacement.
    #[default]
    Bootstrap,
    /// In file order; running out of rows is an error.
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    rows: Vec<Coefficients>,
    mode: EmpiricalMode,
}

impl EmpiricalLaw {
    pub fn new(rows: Vec<Coefficients>, mode: EmpiricalMode) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::param("empirical law has no rows"));
        }
        if let Some((i, c)) = rows.iter().enumerate().find(|(_, c)| !(c.a >= 0.0 && c.b >= 0.0 && c.a.is_finite() && c.b.is_finite())) {
            return Err(Error::param(format!("row {}: ({}, {}) is not a pair of nonnegative finite reals", i + 1, c.a, c.b)));
        }
        Ok(Self { rows, mode })
    }

    pub fn from_path(path: &Path, mode: EmpiricalMode) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?, mode)
    }

    /// Parses CSV with columns `a,b`. A header row is optional; when present
    /// it must name both columns, in any order.
    pub fn from_reader<R: Read>(reader: R, mode: EmpiricalMode) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        let mut columns = (0usize, 1usize);
        for (i, rec) in csv.records().enumerate() {
            let rec = rec?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            if i == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                let find = |name: &str| rec.iter().position(|f| f.eq_ignore_ascii_case(name));
                columns = match (find("a"), find("b")) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(Error::param("empirical CSV header must contain columns a and b")),
                };
                continue;
            }
            let field = |j: usize| -> Result<f64> {
                let s = rec.get(j).ok_or_else(|| Error::param(format!("line {}: missing column {}", i + 1, j + 1)))?;
                s.parse().map_err(|_| Error::param(format!("line {}: cannot parse {s:?} as a number", i + 1)))
            };
            rows.push(Coefficients { a: field(columns.0)?, b: field(columns.1)? });
        }
        Self::new(rows, mode)
    }

    pub fn mode(&self) -> EmpiricalMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> Option<Coefficients> {
        self.rows.get(i).copied()
    }

    #[inline]
    pub fn bootstrap<R: Rng + ?Sized>(&self, rng: &mut R) -> Coefficients {
        self.rows[rng.random_range(0..self.rows.len())]
    }
}
