//! A concrete smooth bump with zero mean and unit energy.
//!
//! `h(z) = κ (β(2z) − β(2z − 1))` with `β(t) = exp(−1/(t(1−t)))` on `(0, 1)`.
//! The two halves have disjoint supports, so `∫h = 0`, `∫h² = κ² ∫β²` and
//! `∫|h| = κ ∫β`. Every derivative of `β` vanishes at the endpoints, which
//! makes the composite midpoint rule converge faster than any power.

use serde::{Deserialize, Serialize};

const QUAD_POINTS: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub kappa: f64,
    /// `∫|h|`.
    pub c: f64,
    /// `‖h‖_∞ = κ e^{−4}`.
    pub sup_norm: f64,
    /// `‖h'‖_∞`.
    pub deriv_sup_norm: f64,
}

pub fn beta(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

fn beta_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let q = t * (1.0 - t);
        beta(t) * (1.0 - 2.0 * t) / (q * q)
    }
}

fn midpoint<F: Fn(f64) -> f64>(f: F, points: usize) -> f64 {
    let h = 1.0 / points as f64;
    (0..points).map(|k| f((k as f64 + 0.5) * h)).sum::<f64>() * h
}

impl BumpFunction {
    pub fn eval(&self, z: f64) -> f64 {
        self.kappa * (beta(2.0 * z) - beta(2.0 * z - 1.0))
    }

    pub fn deriv(&self, z: f64) -> f64 {
        2.0 * self.kappa * (beta_deriv(2.0 * z) - beta_deriv(2.0 * z - 1.0))
    }

    /// `√d · h(d z − j)` for the 0-based `j`-th subinterval of `[0, 1]`.
    pub fn scaled(&self, z: f64, j: usize, d: usize) -> f64 {
        (d as f64).sqrt() * self.eval(d as f64 * z - j as f64)
    }

    /// `Σ_j s_j √d h(dz − j)`; only the cell containing `z` contributes.
    pub fn signed_sum(&self, z: f64, signs: &[i8]) -> f64 {
        let d = signs.len();
        if d == 0 || !(0.0..=1.0).contains(&z) {
            return 0.0;
        }
        let j = ((z * d as f64).floor() as usize).min(d - 1);
        signs[j] as f64 * self.scaled(z, j, d)
    }
}

/// The bump with constants computed by quadrature.
pub fn default_bump() -> BumpFunction {
    let beta_sq = midpoint(|t| beta(t).powi(2), QUAD_POINTS);
    let beta_int = midpoint(beta, QUAD_POINTS);
    let kappa = 1.0 / beta_sq.sqrt();
    let deriv_max = (0..QUAD_POINTS)
        .map(|k| beta_deriv((k as f64 + 0.5) / QUAD_POINTS as f64).abs())
        .fold(0.0, f64::max);
    BumpFunction {
        kappa,
        c: kappa * beta_int,
        sup_norm: kappa * (-4f64).exp(),
        deriv_sup_norm: 2.0 * kappa * deriv_max,
    }
}
