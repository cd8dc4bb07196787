use std::fmt::Display;
use std::io::Write;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Which scheme produced a [`FeatureMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Static,
    Incremental,
}

/// Decoded reservoir output, one row per timestep. Entries are empirical
/// frequencies `count / shots`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    provenance: Provenance,
}

impl FeatureMatrix {
    pub(crate) fn from_rows(rows: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Scheme("feature rows differ in length".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
            provenance,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn last_row(&self) -> Option<&[f64]> {
        self.rows.checked_sub(1).map(|t| self.row(t))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// CSV with header `t,f0,f1,...`, one row per timestep.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("t");
        for f in 0..self.cols {
            header.push_str(&format!(",f{f}"));
        }
        writeln!(out, "{header}")?;
        for (t, row) in self.rows().enumerate() {
            let mut line = t.to_string();
            for v in row {
                line.push_str(&format!(",{v}"));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Output of closed-loop prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRun<X> {
    pub predictions: Vec<X>,
    /// Feature row that fed the model at each step.
    pub features: Vec<Vec<f64>>,
    /// Raw model output at each step.
    pub outputs: Vec<Vec<f64>>,
}

impl<X> PredictionRun<X> {
    pub fn num_pred(&self) -> usize {
        self.predictions.len()
    }
}

impl<X: Display> PredictionRun<X> {
    /// CSV with header `step,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,value")?;
        for (step, v) in self.predictions.iter().enumerate() {
            writeln!(out, "{step},{v}")?;
        }
        Ok(())
    }
}
