//! Bump perturbations of the uniform law that keep every conditional marginal
//! fixed while making X and Y dependent given Z.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::bump::{default_bump, BumpFunction};
use crate::distributions::{ConditionalDiscreteModel, ContinuousConditionalModel, DiscreteJointTable};
use crate::error::{CiError, Result};

pub fn random_signs(len: usize, rng: &mut dyn RngCore) -> Vec<i8> {
    (0..len).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()
}

/// Doubles a `rows × cols` sign matrix into `[Δ, −Δ; −Δ, Δ]`, so every row
/// and column of the result sums to zero.
pub fn make_tilde_delta(delta: &[i8], rows: usize, cols: usize) -> Vec<i8> {
    assert_eq!(delta.len(), rows * cols);
    let mut out = Vec::with_capacity(4 * rows * cols);
    for x in 0..2 * rows {
        for y in 0..2 * cols {
            let sign = if (x < rows) == (y < cols) { 1 } else { -1 };
            out.push(sign * delta[(x % rows) * cols + y % cols]);
        }
    }
    out
}

fn check_signs(v: &[i8], what: &str) -> Result<()> {
    if v.iter().any(|s| *s != 1 && *s != -1) {
        return Err(CiError::Construction(format!("{what} must contain only ±1")));
    }
    Ok(())
}

/// `q(x, y | z) = 1/(ℓ₁ℓ₂) + Δ̃_xy η_ν(z)`, `η_ν(z) = ρ Σ_j ν_j √d h(dz − j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialDiscreteSpec {
    pub ell1: usize,
    pub ell2: usize,
    pub rho: f64,
    pub d: usize,
    pub nu: Vec<i8>,
    /// `ℓ₁/2 × ℓ₂/2`, row-major.
    pub delta: Vec<i8>,
    pub bump: BumpFunction,
    tilde: Vec<i8>,
}

impl AdversarialDiscreteSpec {
    pub fn new(ell1: usize, ell2: usize, rho: f64, d: usize, nu: Vec<i8>, delta: Vec<i8>, bump: BumpFunction) -> Result<Self> {
        if ell1 == 0 || ell2 == 0 || ell1 % 2 != 0 || ell2 % 2 != 0 {
            return Err(CiError::Construction(format!("support sizes must be even, got {ell1}×{ell2}")));
        }
        if d == 0 || nu.len() != d {
            return Err(CiError::Construction(format!("need {d} signs in nu, got {}", nu.len())));
        }
        if delta.len() != ell1 * ell2 / 4 {
            return Err(CiError::Construction(format!("delta must have {} entries", ell1 * ell2 / 4)));
        }
        check_signs(&nu, "nu")?;
        check_signs(&delta, "delta")?;
        if !(rho >= 0.0) {
            return Err(CiError::Construction(format!("rho must be nonnegative, got {rho}")));
        }
        let slack = 1.0 / (ell1 * ell2) as f64 - rho * (d as f64).sqrt() * bump.sup_norm;
        if slack < 0.0 {
            return Err(CiError::Construction(format!(
                "rho = {rho} makes the density negative (max feasible {})",
                Self::max_rho(ell1, ell2, d, &bump)
            )));
        }
        let tilde = make_tilde_delta(&delta, ell1 / 2, ell2 / 2);
        Ok(Self { ell1, ell2, rho, d, nu, delta, bump, tilde })
    }

    /// Random signs with the default bump.
    pub fn random(ell1: usize, ell2: usize, rho: f64, d: usize, rng: &mut dyn RngCore) -> Result<Self> {
        let nu = random_signs(d, rng);
        let delta = random_signs(ell1 * ell2 / 4, rng);
        Self::new(ell1, ell2, rho, d, nu, delta, default_bump())
    }

    pub fn max_rho(ell1: usize, ell2: usize, d: usize, bump: &BumpFunction) -> f64 {
        1.0 / ((ell1 * ell2) as f64 * (d as f64).sqrt() * bump.sup_norm)
    }

    pub fn tilde_delta(&self) -> &[i8] {
        &self.tilde
    }

    pub fn eta(&self, z: f64) -> f64 {
        self.rho * self.bump.signed_sum(z, &self.nu)
    }

    pub fn density(&self, x: usize, y: usize, z: f64) -> f64 {
        1.0 / (self.ell1 * self.ell2) as f64 + self.tilde[x * self.ell2 + y] as f64 * self.eta(z)
    }

    /// `ℓ₁ℓ₂ ρ √d c`.
    pub fn ci_distance(&self) -> f64 {
        (self.ell1 * self.ell2) as f64 * self.rho * (self.d as f64).sqrt() * self.bump.c
    }
}

impl ConditionalDiscreteModel for AdversarialDiscreteSpec {
    fn shape(&self) -> (usize, usize) {
        (self.ell1, self.ell2)
    }

    fn table_at(&self, z: f64) -> DiscreteJointTable {
        let eta = self.eta(z);
        let base = 1.0 / (self.ell1 * self.ell2) as f64;
        let probs = self.tilde.iter().map(|s| (base + *s as f64 * eta).max(0.0)).collect();
        DiscreteJointTable::new(self.ell1, self.ell2, probs).expect("feasible spec")
    }
}

/// `q(x, y | z) = 1 + γ_Δ(x, y) η_ν(z)` on `[0, 1]³` with
/// `γ_Δ(x, y) = ρ² Σ δ_ij √d' h(d'x − i) √d' h(d'y − j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialContinuousSpec {
    pub rho: f64,
    pub d: usize,
    pub d_prime: usize,
    pub nu: Vec<i8>,
    /// `d' × d'`, row-major.
    pub delta: Vec<i8>,
    pub bump: BumpFunction,
    pub s: f64,
}

impl AdversarialContinuousSpec {
    pub fn new(rho: f64, d: usize, d_prime: usize, nu: Vec<i8>, delta: Vec<i8>, bump: BumpFunction, s: f64) -> Result<Self> {
        if d == 0 || d_prime == 0 || nu.len() != d || delta.len() != d_prime * d_prime {
            return Err(CiError::Construction("sign vector sizes do not match d and d'".into()));
        }
        check_signs(&nu, "nu")?;
        check_signs(&delta, "delta")?;
        if !(rho >= 0.0) {
            return Err(CiError::Construction(format!("rho must be nonnegative, got {rho}")));
        }
        let spec = Self { rho, d, d_prime, nu, delta, bump, s };
        if spec.envelope() - 1.0 > 1.0 {
            return Err(CiError::Construction(format!("rho = {rho} makes the density negative")));
        }
        Ok(spec)
    }

    pub fn random(rho: f64, d: usize, d_prime: usize, s: f64, rng: &mut dyn RngCore) -> Result<Self> {
        let nu = random_signs(d, rng);
        let delta = random_signs(d_prime * d_prime, rng);
        Self::new(rho, d, d_prime, nu, delta, default_bump(), s)
    }

    /// `1 + ρ³ d' √d ‖h‖³_∞`, an upper bound on the density.
    pub fn envelope(&self) -> f64 {
        1.0 + self.rho.powi(3) * self.d_prime as f64 * (self.d as f64).sqrt() * self.bump.sup_norm.powi(3)
    }

    pub fn gamma(&self, x: f64, y: f64) -> f64 {
        let dp = self.d_prime;
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return 0.0;
        }
        let i = ((x * dp as f64).floor() as usize).min(dp - 1);
        let j = ((y * dp as f64).floor() as usize).min(dp - 1);
        self.rho.powi(2)
            * self.delta[i * dp + j] as f64
            * self.bump.scaled(x, i, dp)
            * self.bump.scaled(y, j, dp)
    }

    pub fn eta(&self, z: f64) -> f64 {
        self.rho * self.bump.signed_sum(z, &self.nu)
    }

    /// `√(d d'²) ρ³ c³`.
    pub fn ci_distance(&self) -> f64 {
        (self.d as f64).sqrt() * self.d_prime as f64 * self.rho.powi(3) * self.bump.c.powi(3)
    }
}

impl ContinuousConditionalModel for AdversarialContinuousSpec {
    fn density_at(&self, x: f64, y: f64, z: f64) -> f64 {
        1.0 + self.gamma(x, y) * self.eta(z)
    }

    fn sample_xy_given_z(&self, z: f64, rng: &mut dyn RngCore) -> (f64, f64) {
        let env = self.envelope();
        loop {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            let u: f64 = rng.random();
            if u * env <= self.density_at(x, y, z) {
                return (x, y);
            }
        }
    }

    fn marginal_x_mass(&self, lo: f64, hi: f64, _z: f64) -> f64 {
        hi - lo
    }

    fn marginal_y_mass(&self, lo: f64, hi: f64, _z: f64) -> f64 {
        hi - lo
    }
}
