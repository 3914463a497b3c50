//! Observation containers shared by the tests, generators and I/O.

use serde::{Deserialize, Serialize};

use crate::error::{CiError, Result};

/// One of the X / Y columns of a dataset.
///
/// Categories are stored 0-based; the CSV format uses 1-based labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Column {
    Categorical { values: Vec<u32>, levels: u32 },
    Continuous(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Categorical { values, .. } => values.len(),
            Column::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, Column::Categorical { .. })
    }

    /// Builds a categorical column, checking every value is below `levels`.
    pub fn categorical(values: Vec<u32>, levels: u32) -> Result<Self> {
        if levels == 0 {
            return Err(CiError::InvalidConfig("category count must be positive".into()));
        }
        if let Some(&bad) = values.iter().find(|&&v| v >= levels) {
            return Err(CiError::Dimension {
                expected: format!("category < {levels}"),
                got: bad.to_string(),
            });
        }
        Ok(Column::Categorical { values, levels })
    }

    fn truncated(&self, n: usize) -> Column {
        match self {
            Column::Categorical { values, levels } => Column::Categorical {
                values: values[..n].to_vec(),
                levels: *levels,
            },
            Column::Continuous(v) => Column::Continuous(v[..n].to_vec()),
        }
    }

    fn select(&self, idx: &[usize]) -> Column {
        match self {
            Column::Categorical { values, levels } => Column::Categorical {
                values: idx.iter().map(|&i| values[i]).collect(),
                levels: *levels,
            },
            Column::Continuous(v) => Column::Continuous(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// `n` observations `(x_i, y_i, z_i)` with `z_i` of dimension 1 or 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleDataset {
    pub x: Column,
    pub y: Column,
    /// Row-major `n × z_dim` coordinates.
    pub z: Vec<f64>,
    pub z_dim: usize,
}

impl TripleDataset {
    pub fn new(x: Column, y: Column, z: Vec<f64>, z_dim: usize) -> Result<Self> {
        if z_dim == 0 || z_dim > 2 {
            return Err(CiError::UnsupportedDimension(z_dim));
        }
        let n = x.len();
        if y.len() != n || z.len() != n * z_dim {
            return Err(CiError::Dimension {
                expected: format!("{n} rows in every column"),
                got: format!("x={}, y={}, z={}", n, y.len(), z.len() / z_dim),
            });
        }
        Ok(Self { x, y, z, z_dim })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn z_point(&self, i: usize) -> &[f64] {
        &self.z[i * self.z_dim..(i + 1) * self.z_dim]
    }

    /// The first `n` observations.
    pub fn head(&self, n: usize) -> TripleDataset {
        let n = n.min(self.len());
        TripleDataset {
            x: self.x.truncated(n),
            y: self.y.truncated(n),
            z: self.z[..n * self.z_dim].to_vec(),
            z_dim: self.z_dim,
        }
    }

    /// Observations at the given indices, in that order.
    pub fn select(&self, idx: &[usize]) -> TripleDataset {
        let mut z = Vec::with_capacity(idx.len() * self.z_dim);
        for &i in idx {
            z.extend_from_slice(self.z_point(i));
        }
        TripleDataset {
            x: self.x.select(idx),
            y: self.y.select(idx),
            z,
            z_dim: self.z_dim,
        }
    }
}
