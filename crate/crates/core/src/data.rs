// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A `T x p` panel of real observations, stored row-major. Row `t` (0-based)
/// holds observation `X_{t+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationMatrix {
    data: Vec<f64>,
    len: usize,
    dim: usize,
}

impl ObservationMatrix {
    /// Builds a matrix from row-major values. All entries must be finite.
    pub fn new(data: Vec<f64>, len: usize, dim: usize) -> Result<Self> {
        if dim == 0 || len == 0 {
            return Err(Error::input(
                "observation matrix needs at least one row and one column",
            ));
        }
        if data.len() != len * dim {
            return Err(Error::input(format!(
                "{} values cannot fill a {len} x {dim} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite value at row {}, column {}",
                pos / dim + 1,
                pos % dim + 1
            )));
        }
        Ok(Self { data, len, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::input(format!(
                "row {} has {} columns, expected {dim}",
                i + 1,
                rows[i].len()
            )));
        }
        Self::new(rows.concat(), rows.len(), dim)
    }

    /// Univariate series as a `T x 1` matrix.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), values.len(), 1)
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Dimension `p`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row `t`, 0-based.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows `start..end` (0-based, half-open) as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len {
            return Err(Error::input(format!(
                "row range {start}..{end} is empty or exceeds {} rows",
                self.len
            )));
        }
        Ok(Self {
            data: self.data[start * self.dim..end * self.dim].to_vec(),
            len: end - start,
            dim: self.dim,
        })
    }

    /// Time-reversed copy.
    pub fn reversed(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for t in (0..self.len).rev() {
            data.extend_from_slice(self.row(t));
        }
        Self {
            data,
            len: self.len,
            dim: self.dim,
        }
    }

    /// Reads a headed, comma-separated file of numbers.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_reader(file)
    }

    /// Parses CSV with a header line. Row numbers in errors count data rows
    /// from 1.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let dim = rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 0,
                msg: e.to_string(),
            })?
            .len();
        let mut data = Vec::new();
        let mut len = 0;
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| Error::Parse {
                row,
                msg: e.to_string(),
            })?;
            if record.len() != dim {
                return Err(Error::Parse {
                    row,
                    msg: format!("expected {dim} fields, found {}", record.len()),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    msg: format!("column {} is not a number: `{cell}`", j + 1),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        msg: format!("column {} is not finite", j + 1),
                    });
                }
                data.push(v);
            }
            len += 1;
        }
        if len == 0 {
            return Err(Error::Parse {
                row: 1,
                msg: "no data rows".into(),
            });
        }
        Self::new(data, len, dim)
    }

    /// Writes the matrix with header `x1..xp`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let to_io = |e: csv::Error| Error::Io {
            path: "<csv output>".into(),
            source: std::io::Error::other(e.to_string()),
        };
        w.write_record((1..=self.dim).map(|j| format!("x{j}")))
            .map_err(to_io)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| format!("{v}")))
                .map_err(to_io)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv output>".into(),
            source,
        })
    }
}
