//! Moves each observation a bounded distance so that X and Y become exactly
//! independent given Z. The cell identity of (X, Y) is hidden in the fine
//! position of Z inside its own cell.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::data::{Column, TripleDataset};
use crate::error::{CiError, Result};

/// Partition of `[−M, M]` into `m` equal cells along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub m: usize,
    pub big_m: f64,
}

impl CouplingSpec {
    pub fn new(m: usize, big_m: f64) -> Result<Self> {
        if m == 0 || !(big_m > 0.0) || !big_m.is_finite() {
            return Err(CiError::InvalidConfig(format!("need m ≥ 1 and M > 0, got m={m}, M={big_m}")));
        }
        Ok(Self { m, big_m })
    }

    pub fn width(&self) -> f64 {
        2.0 * self.big_m / self.m as f64
    }

    /// `√3 · 2M/m`, the largest possible move of one observation.
    pub fn displacement_bound(&self) -> f64 {
        3f64.sqrt() * self.width()
    }

    /// 0-based cell of `v`; the right end `M` belongs to the last cell.
    pub fn cell(&self, v: f64) -> Result<usize> {
        if !(v >= -self.big_m && v <= self.big_m) {
            return Err(CiError::OutOfSupport { value: v, lo: -self.big_m, hi: self.big_m });
        }
        Ok((((v + self.big_m) / self.width()).floor() as usize).min(self.m - 1))
    }

    fn left(&self, cell: usize) -> f64 {
        -self.big_m + cell as f64 * self.width()
    }
}

fn continuous(col: &Column, name: &str) -> Result<Vec<f64>> {
    match col {
        Column::Continuous(v) => Ok(v.clone()),
        Column::Categorical { .. } => Err(CiError::ModeMismatch(format!("coupling needs continuous {name}"))),
    }
}

/// For `(X, Y, Z) ∈ A_i × B_j × C_k`, draws `Z̃` uniformly on the `(i, j)`-th
/// of `m²` subintervals of `C_k` and `(X̃, Ỹ)` uniformly on `A_i × B_j`.
pub fn ci_coupling(data: &TripleDataset, spec: &CouplingSpec, rng: &mut dyn RngCore) -> Result<TripleDataset> {
    if data.z_dim != 1 {
        return Err(CiError::UnsupportedDimension(data.z_dim));
    }
    let xs = continuous(&data.x, "X")?;
    let ys = continuous(&data.y, "Y")?;
    let w = spec.width();
    let sub = w / (spec.m * spec.m) as f64;
    let n = data.len();
    let (mut xt, mut yt, mut zt) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for t in 0..n {
        let i = spec.cell(xs[t])?;
        let j = spec.cell(ys[t])?;
        let k = spec.cell(data.z[t])?;
        let z_lo = spec.left(k) + (i * spec.m + j) as f64 * sub;
        xt.push(spec.left(i) + w * rng.random::<f64>());
        yt.push(spec.left(j) + w * rng.random::<f64>());
        zt.push(z_lo + sub * rng.random::<f64>());
    }
    TripleDataset::new(Column::Continuous(xt), Column::Continuous(yt), zt, 1)
}

/// Recovers `(i, j, k)` from a coupled `Z̃`.
pub fn coupled_cell(spec: &CouplingSpec, z: f64) -> Result<(usize, usize, usize)> {
    let k = spec.cell(z)?;
    let sub = spec.width() / (spec.m * spec.m) as f64;
    let r = (((z - spec.left(k)) / sub).floor() as usize).min(spec.m * spec.m - 1);
    Ok((r / spec.m, r % spec.m, k))
}
