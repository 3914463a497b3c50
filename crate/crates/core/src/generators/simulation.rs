//! The simulation families: exponential-family 2×3 tables, and the additive
//! uniform models for continuous X and Y.

use rand::{Rng, RngCore};

use crate::distributions::{ConditionalDiscreteModel, ContinuousConditionalModel, DiscreteJointTable};

/// `p(x, y | z) ∝ exp(g(x, y, z))` over an `ℓ₁ × ℓ₂` grid.
pub struct ExpFamilyModel<G> {
    pub ell1: usize,
    pub ell2: usize,
    pub exponent: G,
}

impl<G: Fn(usize, usize, f64) -> f64 + Sync> ConditionalDiscreteModel for ExpFamilyModel<G> {
    fn shape(&self) -> (usize, usize) {
        (self.ell1, self.ell2)
    }

    fn table_at(&self, z: f64) -> DiscreteJointTable {
        let mut w = Vec::with_capacity(self.ell1 * self.ell2);
        for x in 0..self.ell1 {
            for y in 0..self.ell2 {
                w.push((self.exponent)(x, y, z).exp());
            }
        }
        DiscreteJointTable::from_weights(self.ell1, self.ell2, w).expect("finite positive weights")
    }
}

pub type ExponentFn = fn(usize, usize, f64) -> f64;

fn null_exponent(x: usize, y: usize, z: f64) -> f64 {
    let row = if x == 0 { z } else { z.cos() - 1.0 };
    let col = match y {
        0 => z.tanh(),
        1 => z.cos(),
        _ => z.sin(),
    };
    row + col
}

fn alt_exponent(x: usize, y: usize, z: f64) -> f64 {
    match (x, y) {
        (0, 0) => z,
        (0, 1) => z.tanh(),
        (0, 2) => z.sin(),
        (1, 0) => z.cos(),
        (1, 1) => z + 1.0,
        _ => z.tanh() - 1.0,
    }
}

/// 2×3 null table; the exponent is a row term plus a column term.
pub fn discrete_null() -> ExpFamilyModel<ExponentFn> {
    ExpFamilyModel { ell1: 2, ell2: 3, exponent: null_exponent }
}

/// 2×3 alternative table that does not factor.
pub fn discrete_alt() -> ExpFamilyModel<ExponentFn> {
    ExpFamilyModel { ell1: 2, ell2: 3, exponent: alt_exponent }
}

pub fn gen_discrete_null(z: f64) -> DiscreteJointTable {
    discrete_null().table_at(z)
}

pub fn gen_discrete_alt(z: f64) -> DiscreteJointTable {
    discrete_alt().table_at(z)
}

/// Exponents `a·sin(b z + c)` per cell; each is `|a b|`-Lipschitz in `z`.
#[derive(Debug, Clone)]
pub struct SinusoidalExponents {
    pub ell1: usize,
    pub ell2: usize,
    pub coeffs: Vec<(f64, f64, f64)>,
}

impl SinusoidalExponents {
    /// Random exponents whose Lipschitz constants are at most `lipschitz`.
    pub fn random(ell1: usize, ell2: usize, lipschitz: f64, rng: &mut dyn RngCore) -> Self {
        let coeffs = (0..ell1 * ell2)
            .map(|_| {
                let b: f64 = rng.random_range(0.5..6.0);
                let a = rng.random_range(-1.0..1.0) * lipschitz / b;
                let c = rng.random_range(0.0..std::f64::consts::TAU);
                (a, b, c)
            })
            .collect();
        Self { ell1, ell2, coeffs }
    }

    pub fn lipschitz(&self) -> f64 {
        self.coeffs.iter().map(|(a, b, _)| (a * b).abs()).fold(0.0, f64::max)
    }
}

impl ConditionalDiscreteModel for SinusoidalExponents {
    fn shape(&self) -> (usize, usize) {
        (self.ell1, self.ell2)
    }

    fn table_at(&self, z: f64) -> DiscreteJointTable {
        let w = self.coeffs.iter().map(|(a, b, c)| (a * (b * z + c).sin()).exp()).collect();
        DiscreteJointTable::from_weights(self.ell1, self.ell2, w).expect("positive weights")
    }
}

/// `X = (U₁ + Z)/2`, `Y = (U₂ + Z)/2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ContinuousNull;

/// `X = (U₁ + U + Z)/3`, `Y = (U₂ + U + Z)/3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ContinuousAlt;

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// CDF of `U₁ + U₂` (triangular on `[0, 2]`).
fn triangular_cdf(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t <= 1.0 {
        t * t / 2.0
    } else if t < 2.0 {
        1.0 - (2.0 - t) * (2.0 - t) / 2.0
    } else {
        1.0
    }
}

impl ContinuousConditionalModel for ContinuousNull {
    fn density_at(&self, x: f64, y: f64, z: f64) -> f64 {
        let inside = |v: f64| (z / 2.0..=(z + 1.0) / 2.0).contains(&v);
        if inside(x) && inside(y) {
            4.0
        } else {
            0.0
        }
    }

    fn sample_xy_given_z(&self, z: f64, rng: &mut dyn RngCore) -> (f64, f64) {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        ((u1 + z) / 2.0, (u2 + z) / 2.0)
    }

    fn marginal_x_mass(&self, lo: f64, hi: f64, z: f64) -> f64 {
        clamp01(2.0 * hi - z) - clamp01(2.0 * lo - z)
    }

    fn marginal_y_mass(&self, lo: f64, hi: f64, z: f64) -> f64 {
        self.marginal_x_mass(lo, hi, z)
    }

    fn cell_mass(&self, x: (f64, f64), y: (f64, f64), z: f64) -> f64 {
        self.marginal_x_mass(x.0, x.1, z) * self.marginal_y_mass(y.0, y.1, z)
    }
}

impl ContinuousConditionalModel for ContinuousAlt {
    fn density_at(&self, x: f64, y: f64, z: f64) -> f64 {
        let a = 3.0 * x - z;
        let b = 3.0 * y - z;
        9.0 * (a.min(b).min(1.0) - (a - 1.0).max(b - 1.0).max(0.0)).max(0.0)
    }

    fn sample_xy_given_z(&self, z: f64, rng: &mut dyn RngCore) -> (f64, f64) {
        let u: f64 = rng.random();
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        ((u1 + u + z) / 3.0, (u2 + u + z) / 3.0)
    }

    fn marginal_x_mass(&self, lo: f64, hi: f64, z: f64) -> f64 {
        triangular_cdf(3.0 * hi - z) - triangular_cdf(3.0 * lo - z)
    }

    fn marginal_y_mass(&self, lo: f64, hi: f64, z: f64) -> f64 {
        self.marginal_x_mass(lo, hi, z)
    }

    /// `∫₀¹ P(U₁ ∈ [a₀−u, a₁−u]) P(U₂ ∈ [b₀−u, b₁−u]) du`; the integrand is
    /// piecewise quadratic in `u`, so Simpson's rule between its kinks is exact.
    fn cell_mass(&self, x: (f64, f64), y: (f64, f64), z: f64) -> f64 {
        let (a0, a1) = (3.0 * x.0 - z, 3.0 * x.1 - z);
        let (b0, b1) = (3.0 * y.0 - z, 3.0 * y.1 - z);
        let f = |u: f64| {
            let px = clamp01(a1 - u) - clamp01(a0 - u);
            let py = clamp01(b1 - u) - clamp01(b0 - u);
            px * py
        };
        let mut knots = vec![0.0, 1.0];
        for v in [a0, a1, b0, b1] {
            for k in [v - 1.0, v] {
                if k > 0.0 && k < 1.0 {
                    knots.push(k);
                }
            }
        }
        knots.sort_by(f64::total_cmp);
        knots
            .windows(2)
            .map(|w| {
                let (l, r) = (w[0], w[1]);
                (r - l) / 6.0 * (f(l) + 4.0 * f(0.5 * (l + r)) + f(r))
            })
            .sum()
    }
}
