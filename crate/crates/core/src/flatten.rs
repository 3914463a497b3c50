//! Split distributions and the weighted U-statistic.
//!
//! A sample of size `σ` is cut to `σ' = 4 + 4t` (trailing samples dropped).
//! The first `t₁ = min(t, ℓ₁)` x-values give the flattening counts `a_x`, the
//! next `t₂ = min(t, ℓ₂)` y-values give `a'_y`, and the last `2t + 4` pairs feed
//! the statistic. Indices `t₁ + t₂ .. 2t` are unused.

use serde::{Deserialize, Serialize};

use crate::distributions::DiscreteJointTable;
use crate::error::{CiError, Result};
use crate::ustat::{self, DiscretePairSample};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub dx: Vec<u32>,
    pub dy: Vec<u32>,
    pub dxy: DiscretePairSample,
    pub t: usize,
    pub t1: usize,
    pub t2: usize,
}

/// Counts `a_x`, `a'_y`; the cell weight is `(1 + a_x)(1 + a'_y)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatteningWeights {
    pub ax: Vec<u32>,
    pub ay: Vec<u32>,
}

impl FlatteningWeights {
    pub fn zeros(ell1: usize, ell2: usize) -> Self {
        Self {
            ax: vec![0; ell1],
            ay: vec![0; ell2],
        }
    }

    pub fn cell_weight(&self, x: usize, y: usize) -> f64 {
        (1.0 + self.ax[x] as f64) * (1.0 + self.ay[y] as f64)
    }

    /// `(1 + a_x)` and `(1 + a'_y)` as floats.
    pub fn factors(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.ax.iter().map(|a| 1.0 + *a as f64).collect(),
            self.ay.iter().map(|a| 1.0 + *a as f64).collect(),
        )
    }

    fn check_shape(&self, ell1: usize, ell2: usize) -> Result<()> {
        if self.ax.len() != ell1 || self.ay.len() != ell2 {
            return Err(CiError::Dimension {
                expected: format!("{ell1}x{ell2} weights"),
                got: format!("{}x{}", self.ax.len(), self.ay.len()),
            });
        }
        Ok(())
    }
}

pub fn split_dataset(data: &DiscretePairSample) -> Result<SplitPlan> {
    let sigma = data.len();
    if sigma < 4 {
        return Err(CiError::InsufficientSample { needed: 4, got: sigma });
    }
    let t = (sigma - 4) / 4;
    let used = 4 + 4 * t;
    let t1 = t.min(data.ell1);
    let t2 = t.min(data.ell2);
    Ok(SplitPlan {
        dx: data.xs[..t1].to_vec(),
        dy: data.ys[t1..t1 + t2].to_vec(),
        dxy: DiscretePairSample {
            xs: data.xs[2 * t..used].to_vec(),
            ys: data.ys[2 * t..used].to_vec(),
            ell1: data.ell1,
            ell2: data.ell2,
        },
        t,
        t1,
        t2,
    })
}

pub fn flattening_weights(plan: &SplitPlan) -> FlatteningWeights {
    let mut w = FlatteningWeights::zeros(plan.dxy.ell1, plan.dxy.ell2);
    for &x in &plan.dx {
        w.ax[x as usize] += 1;
    }
    for &y in &plan.dy {
        w.ay[y as usize] += 1;
    }
    w
}

/// `Σ p(x,y)² / (1 + a_xy)`.
pub fn split_norm_sq(p: &DiscreteJointTable, w: &FlatteningWeights) -> Result<f64> {
    w.check_shape(p.ell1(), p.ell2())?;
    let mut acc = 0.0;
    for x in 0..p.ell1() {
        for y in 0..p.ell2() {
            acc += p.get(x, y).powi(2) / w.cell_weight(x, y);
        }
    }
    Ok(acc)
}

/// `Σ (p(x,y) − q(x,y))² / (1 + a_xy)`.
pub fn split_distance_sq(p: &DiscreteJointTable, q: &DiscreteJointTable, w: &FlatteningWeights) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(CiError::Dimension {
            expected: format!("{:?}", p.shape()),
            got: format!("{:?}", q.shape()),
        });
    }
    w.check_shape(p.ell1(), p.ell2())?;
    let mut acc = 0.0;
    for x in 0..p.ell1() {
        for y in 0..p.ell2() {
            acc += (p.get(x, y) - q.get(x, y)).powi(2) / w.cell_weight(x, y);
        }
    }
    Ok(acc)
}

/// Weighted U-statistic on `plan.dxy`; count-based.
pub fn weighted_u_statistic(plan: &SplitPlan, w: &FlatteningWeights) -> Result<f64> {
    w.check_shape(plan.dxy.ell1, plan.dxy.ell2)?;
    let (wx, wy) = w.factors();
    ustat::weighted_u_statistic_fast(&plan.dxy, &wx, &wy)
}

/// Kernel-enumeration form of [`weighted_u_statistic`].
pub fn weighted_u_statistic_naive(plan: &SplitPlan, w: &FlatteningWeights) -> Result<f64> {
    w.check_shape(plan.dxy.ell1, plan.dxy.ell2)?;
    let (wx, wy) = w.factors();
    ustat::weighted_u_statistic_naive(&plan.dxy, &wx, &wy)
}

/// `√(min(σ, ℓ₁)·min(σ, ℓ₂))`.
pub fn omega_weight(sigma_m: usize, ell1: usize, ell2: usize) -> f64 {
    ((sigma_m.min(ell1) * sigma_m.min(ell2)) as f64).sqrt()
}

/// Split, weigh and evaluate one bin in a single pass; `σ ≥ 4` required.
pub(crate) fn weighted_u_of_slices(xs: &[u32], ys: &[u32], ell1: usize, ell2: usize) -> f64 {
    let sigma = xs.len();
    let t = (sigma - 4) / 4;
    let used = 4 + 4 * t;
    let t1 = t.min(ell1);
    let t2 = t.min(ell2);
    let mut wx = vec![1.0; ell1];
    let mut wy = vec![1.0; ell2];
    for &x in &xs[..t1] {
        wx[x as usize] += 1.0;
    }
    for &y in &ys[t1..t1 + t2] {
        wy[y as usize] += 1.0;
    }
    ustat::u_from_slices(&xs[2 * t..used], &ys[2 * t..used], ell1, ell2, Some((&wx, &wy)))
}
