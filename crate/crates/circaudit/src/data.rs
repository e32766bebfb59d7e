//! Column-oriented numeric tables: CSV ingestion, schema inference, splitting.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CircError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<f64>,
}

/// Rectangular numeric table. Immutable after construction; columns carry a
/// continuous/binary tag so binary features get a single linear coefficient
/// instead of a spline block.
#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
}

impl Dataset {
    /// Builds a dataset from named columns, inferring kinds and rejecting
    /// non-finite cells and ragged input.
    pub fn from_columns(named: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if named.is_empty() {
            return Err(CircError::EmptyInput("no columns"));
        }
        let n_rows = named[0].1.len();
        for (i, (name, _)) in named.iter().enumerate() {
            if named[..i].iter().any(|(other, _)| other == name) {
                return Err(CircError::DuplicateHeader(name.clone()));
            }
        }
        let mut columns = Vec::with_capacity(named.len());
        for (name, values) in named {
            if values.len() != n_rows {
                return Err(CircError::RaggedRow {
                    row: 0,
                    found: values.len(),
                    expected: n_rows,
                });
            }
            for (row, v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(CircError::NonFinite {
                        column: name.clone(),
                        row,
                    });
                }
            }
            let kind = infer_kind(&values);
            columns.push(Column { name, kind, values });
        }
        Ok(Dataset { columns, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| CircError::UnknownColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    /// Names of all columns except `target`, in table order.
    pub fn feature_names(&self, target: &str) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.name != target)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Replaces or appends a column. Used to attach prediction targets.
    pub fn with_column(&self, name: &str, values: Vec<f64>) -> Result<Dataset> {
        let mut named: Vec<(String, Vec<f64>)> = self
            .columns
            .iter()
            .filter(|c| c.name != name)
            .map(|c| (c.name.clone(), c.values.clone()))
            .collect();
        named.push((name.to_string(), values));
        Dataset::from_columns(named)
    }

    /// Projects onto a subset of columns, keeping table order.
    pub fn select(&self, names: &[&str]) -> Result<Dataset> {
        for n in names {
            self.column(n)?;
        }
        let named = self
            .columns
            .iter()
            .filter(|c| names.contains(&c.name.as_str()))
            .map(|c| (c.name.clone(), c.values.clone()))
            .collect();
        Dataset::from_columns(named)
    }

    /// Seeded uniform row split without replacement into (train, test).
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(CircError::InvalidArgument(format!(
                "split fraction must be in (0,1), got {fraction}"
            )));
        }
        let n_train = ((self.n_rows as f64) * fraction).round() as usize;
        if n_train == 0 || n_train == self.n_rows {
            return Err(CircError::EmptySplit(fraction));
        }
        let mut idx: Vec<usize> = (0..self.n_rows).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        idx.shuffle(&mut rng);
        let (train_idx, test_idx) = idx.split_at(n_train);
        Ok((self.take_rows(train_idx), self.take_rows(test_idx)))
    }

    fn take_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                kind: c.kind,
                values: rows.iter().map(|&r| c.values[r]).collect(),
            })
            .collect();
        Dataset {
            columns,
            n_rows: rows.len(),
        }
    }

    /// CSV with header row; floats at 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in 0..self.n_rows {
            for (i, c) in self.columns.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_cell(&mut out, c.values[row]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| CircError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    /// SHA-256 of the CSV serialization, hex-encoded. Report provenance.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_csv().as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn infer_kind(values: &[f64]) -> ColumnKind {
    if values.iter().all(|&v| v == 0.0 || v == 1.0) {
        ColumnKind::Binary
    } else {
        ColumnKind::Continuous
    }
}

fn write_cell(out: &mut String, v: f64) {
    if v == v.trunc() && v.abs() < 1e15 {
        let _ = write!(out, "{}", v as i64);
    } else {
        let _ = write!(out, "{:.8e}", v);
    }
}

/// Parses a header + numeric-cell CSV and checks the target column exists.
pub fn read_csv(path: &Path, target: &str) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| CircError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let dataset = parse_csv(&text)?;
    dataset.column(target)?;
    Ok(dataset)
}

pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header_line = lines.next().ok_or(CircError::EmptyInput("empty CSV"))?;
    let names: Vec<String> = header_line.split(',').map(|s| s.trim().to_string()).collect();
    let n_cols = names.len();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); n_cols];
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_cols {
            return Err(CircError::RaggedRow {
                row: row + 1,
                found: cells.len(),
                expected: n_cols,
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| CircError::ParseCell {
                row: row + 1,
                column: names[j].clone(),
                value: cell.trim().to_string(),
            })?;
            values[j].push(v);
        }
    }
    Dataset::from_columns(names.into_iter().zip(values).collect())
}
