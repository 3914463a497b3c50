//! Discrete joint tables, conditional models, and the TV / L² / χ² metrics.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::data::{Column, TripleDataset};
use crate::error::{CiError, Result};

/// Tolerance on the total mass of a probability table.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A probability table over `[ℓ₁] × [ℓ₂]`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJointTable {
    probs: Vec<f64>,
    ell1: usize,
    ell2: usize,
}

impl DiscreteJointTable {
    /// Validates nonnegativity and unit mass (within [`MASS_TOLERANCE`]).
    pub fn new(ell1: usize, ell2: usize, probs: Vec<f64>) -> Result<Self> {
        if ell1 == 0 || ell2 == 0 {
            return Err(CiError::InvalidTable("support sizes must be positive".into()));
        }
        if probs.len() != ell1 * ell2 {
            return Err(CiError::Dimension {
                expected: format!("{} cells", ell1 * ell2),
                got: probs.len().to_string(),
            });
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(CiError::InvalidTable(format!("entry {p} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(CiError::InvalidTable(format!("entries sum to {total}")));
        }
        Ok(Self { probs, ell1, ell2 })
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn from_weights(ell1: usize, ell2: usize, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(CiError::InvalidTable(format!("weights sum to {total}")));
        }
        Self::new(ell1, ell2, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(ell1: usize, ell2: usize) -> Self {
        let cells = ell1 * ell2;
        Self {
            probs: vec![1.0 / cells as f64; cells],
            ell1,
            ell2,
        }
    }

    /// Unit mass at cell `(x, y)` (0-based).
    pub fn point_mass(ell1: usize, ell2: usize, x: usize, y: usize) -> Self {
        let mut probs = vec![0.0; ell1 * ell2];
        probs[x * ell2 + y] = 1.0;
        Self { probs, ell1, ell2 }
    }

    pub fn outer(px: &[f64], py: &[f64]) -> Result<Self> {
        let probs = px
            .iter()
            .flat_map(|a| py.iter().map(move |b| a * b))
            .collect();
        Self::new(px.len(), py.len(), probs)
    }

    pub fn ell1(&self) -> usize {
        self.ell1
    }

    pub fn ell2(&self) -> usize {
        self.ell2
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ell1, self.ell2)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.ell2 + y]
    }

    pub fn marginals(&self) -> DiscreteMarginalPair {
        let mut px = vec![0.0; self.ell1];
        let mut py = vec![0.0; self.ell2];
        for x in 0..self.ell1 {
            for y in 0..self.ell2 {
                let p = self.get(x, y);
                px[x] += p;
                py[y] += p;
            }
        }
        DiscreteMarginalPair { px, py }
    }

    /// Draws one cell `(x, y)` by inversion.
    pub fn sample_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> (u32, u32) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (k, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                last = k;
            }
            acc += p;
            if u < acc {
                return ((k / self.ell2) as u32, (k % self.ell2) as u32);
            }
        }
        ((last / self.ell2) as u32, (last % self.ell2) as u32)
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(CiError::Dimension {
                expected: format!("{}x{}", self.ell1, self.ell2),
                got: format!("{}x{}", other.ell1, other.ell2),
            });
        }
        Ok(())
    }
}

/// Marginals `p_X`, `p_Y` of a joint table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMarginalPair {
    pub px: Vec<f64>,
    pub py: Vec<f64>,
}

/// `½ Σ |p − q|`.
pub fn tv_distance(p: &DiscreteJointTable, q: &DiscreteJointTable) -> Result<f64> {
    p.check_shape(q)?;
    Ok(0.5 * l1_norm_diff(&p.probs, &q.probs))
}

/// `Σ (p − q)²`.
pub fn l2_distance_sq(p: &DiscreteJointTable, q: &DiscreteJointTable) -> Result<f64> {
    p.check_shape(q)?;
    Ok(p.probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// `Σ_{q>0} (p − q)²/q`, or `+∞` when `p` puts mass where `q` has none.
pub fn chi_sq_divergence(p: &DiscreteJointTable, q: &DiscreteJointTable) -> Result<f64> {
    p.check_shape(q)?;
    Ok(chi_sq(&p.probs, &q.probs))
}

/// `p_X · p_Y` as a joint table.
pub fn product_of_marginals(p: &DiscreteJointTable) -> DiscreteJointTable {
    let m = p.marginals();
    let probs = m
        .px
        .iter()
        .flat_map(|a| m.py.iter().map(move |b| a * b))
        .collect();
    DiscreteJointTable {
        probs,
        ell1: p.ell1,
        ell2: p.ell2,
    }
}

/// `Σ |p_i − q_i|` over two mass vectors of equal length.
pub fn l1_norm_diff(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

/// χ² divergence of mass vectors; 0/0 cells contribute nothing.
pub fn chi_sq(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (a, b) in p.iter().zip(q) {
        if *b > 0.0 {
            acc += (a - b) * (a - b) / b;
        } else if *a > 0.0 {
            return f64::INFINITY;
        }
    }
    acc
}

/// A conditional law of discrete `(X, Y)` given scalar `Z ∈ [0, 1]`.
pub trait ConditionalDiscreteModel: Sync {
    fn shape(&self) -> (usize, usize);

    fn table_at(&self, z: f64) -> DiscreteJointTable;

    /// Density of `Z` on `[0, 1]`; uniform unless overridden.
    fn z_density(&self, _z: f64) -> f64 {
        1.0
    }

    fn sample_z(&self, rng: &mut dyn RngCore) -> f64 {
        rng.random()
    }

    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> TripleDataset {
        let (ell1, ell2) = self.shape();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        for _ in 0..n {
            let z = self.sample_z(rng);
            let (x, y) = self.table_at(z).sample_cell(rng);
            xs.push(x);
            ys.push(y);
            zs.push(z);
        }
        TripleDataset {
            x: Column::Categorical { values: xs, levels: ell1 as u32 },
            y: Column::Categorical { values: ys, levels: ell2 as u32 },
            z: zs,
            z_dim: 1,
        }
    }
}

/// A conditional density of `(X, Y) ∈ [0, 1]²` given scalar `Z ∈ [0, 1]`.
pub trait ContinuousConditionalModel: Sync {
    fn density_at(&self, x: f64, y: f64, z: f64) -> f64;

    fn z_density(&self, _z: f64) -> f64 {
        1.0
    }

    fn sample_z(&self, rng: &mut dyn RngCore) -> f64 {
        rng.random()
    }

    fn sample_xy_given_z(&self, z: f64, rng: &mut dyn RngCore) -> (f64, f64);

    /// `P(X ∈ [lo, hi) | Z = z)`; midpoint quadrature over `y` unless overridden.
    fn marginal_x_mass(&self, lo: f64, hi: f64, z: f64) -> f64 {
        marginal_mass_by_quadrature(|x, y| self.density_at(x, y, z), lo, hi, true)
    }

    /// `P(Y ∈ [lo, hi) | Z = z)`.
    fn marginal_y_mass(&self, lo: f64, hi: f64, z: f64) -> f64 {
        marginal_mass_by_quadrature(|x, y| self.density_at(x, y, z), lo, hi, false)
    }

    /// `P(X ∈ x, Y ∈ y | Z = z)` for intervals `x`, `y`; midpoint quadrature unless overridden.
    fn cell_mass(&self, x: (f64, f64), y: (f64, f64), z: f64) -> f64 {
        const K: usize = 32;
        let (wx, wy) = ((x.1 - x.0) / K as f64, (y.1 - y.0) / K as f64);
        let mut acc = 0.0;
        for i in 0..K {
            for j in 0..K {
                acc += self.density_at(x.0 + (i as f64 + 0.5) * wx, y.0 + (j as f64 + 0.5) * wy, z);
            }
        }
        acc * wx * wy
    }

    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> TripleDataset {
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        for _ in 0..n {
            let z = self.sample_z(rng);
            let (x, y) = self.sample_xy_given_z(z, rng);
            xs.push(x);
            ys.push(y);
            zs.push(z);
        }
        TripleDataset {
            x: Column::Continuous(xs),
            y: Column::Continuous(ys),
            z: zs,
            z_dim: 1,
        }
    }
}

const MARGINAL_QUAD_POINTS: usize = 256;

fn marginal_mass_by_quadrature<F: Fn(f64, f64) -> f64>(f: F, lo: f64, hi: f64, over_x: bool) -> f64 {
    let h = 1.0 / MARGINAL_QUAD_POINTS as f64;
    let mid = 0.5 * (lo + hi);
    let width = hi - lo;
    let mut acc = 0.0;
    for k in 0..MARGINAL_QUAD_POINTS {
        let t = (k as f64 + 0.5) * h;
        acc += if over_x { f(mid, t) } else { f(t, mid) };
    }
    acc * h * width
}

/// Composite midpoint grid used by [`model_ci_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Points per axis; must be even so the half-resolution check is defined.
    pub points: usize,
    /// When set, fail unless the half-grid error estimate is below this value.
    pub tolerance: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            points: 512,
            tolerance: None,
        }
    }
}

/// A quadrature value with its estimated error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureValue {
    pub value: f64,
    /// `|I(points) − I(points / 2)|`.
    pub error_estimate: f64,
}

/// Either kind of conditional model.
#[derive(Clone, Copy)]
pub enum ModelRef<'a> {
    Discrete(&'a dyn ConditionalDiscreteModel),
    Continuous(&'a dyn ContinuousConditionalModel),
}

/// `E_Z ‖p_{X,Y|Z} − p_{X|Z} p_{Y|Z}‖₁` by midpoint quadrature.
///
/// This is the CI-proxy distance: it upper-bounds the L¹ distance from `p`
/// to the set of conditionally independent laws and is at most six times
/// that distance.
pub fn model_ci_distance(model: ModelRef<'_>, quad: QuadratureSpec) -> Result<QuadratureValue> {
    if quad.points < 2 || quad.points % 2 != 0 {
        return Err(CiError::InvalidConfig(format!(
            "quadrature points must be even and ≥ 2, got {}",
            quad.points
        )));
    }
    let eval = |points: usize| match model {
        ModelRef::Discrete(m) => discrete_ci_integral(m, points),
        ModelRef::Continuous(m) => continuous_ci_integral(m, points),
    };
    let value = eval(quad.points);
    let coarse = eval(quad.points / 2);
    let error_estimate = (value - coarse).abs();
    if let Some(target) = quad.tolerance {
        if error_estimate > target {
            return Err(CiError::Tolerance {
                target,
                estimate: error_estimate,
            });
        }
    }
    Ok(QuadratureValue {
        value,
        error_estimate,
    })
}

fn discrete_ci_integral(model: &dyn ConditionalDiscreteModel, points: usize) -> f64 {
    let h = 1.0 / points as f64;
    (0..points)
        .map(|k| {
            let z = (k as f64 + 0.5) * h;
            let table = model.table_at(z);
            let prod = product_of_marginals(&table);
            l1_norm_diff(table.probs(), prod.probs()) * model.z_density(z)
        })
        .sum::<f64>()
        * h
}

fn continuous_ci_integral(model: &dyn ContinuousConditionalModel, points: usize) -> f64 {
    let h = 1.0 / points as f64;
    let mut grid = vec![0.0; points * points];
    let mut fx = vec![0.0; points];
    let mut fy = vec![0.0; points];
    let mut total = 0.0;
    for kz in 0..points {
        let z = (kz as f64 + 0.5) * h;
        fx.iter_mut().for_each(|v| *v = 0.0);
        fy.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..points {
            let x = (i as f64 + 0.5) * h;
            for j in 0..points {
                let y = (j as f64 + 0.5) * h;
                let f = model.density_at(x, y, z);
                grid[i * points + j] = f;
                fx[i] += f * h;
                fy[j] += f * h;
            }
        }
        let mut l1 = 0.0;
        for i in 0..points {
            for j in 0..points {
                l1 += (grid[i * points + j] - fx[i] * fy[j]).abs();
            }
        }
        total += l1 * h * h * model.z_density(z);
    }
    total * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(ell1: usize, ell2: usize, p: &[f64]) -> DiscreteJointTable {
        DiscreteJointTable::new(ell1, ell2, p.to_vec()).unwrap()
    }

    fn diag() -> DiscreteJointTable {
        table(2, 2, &[0.5, 0.0, 0.0, 0.5])
    }

    #[test]
    fn construction_checks_mass_and_sign() {
        assert!(DiscreteJointTable::new(2, 2, vec![0.5, 0.5, 0.0, 0.1]).is_err());
        assert!(DiscreteJointTable::new(2, 1, vec![1.5, -0.5]).is_err());
        assert!(DiscreteJointTable::new(2, 2, vec![0.25; 3]).is_err());
        assert!(DiscreteJointTable::new(1, 2, vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn tv_examples() {
        let p = diag();
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        let a = DiscreteJointTable::point_mass(2, 2, 0, 0);
        let b = DiscreteJointTable::point_mass(2, 2, 1, 1);
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        let u = DiscreteJointTable::uniform(2, 2);
        assert!((tv_distance(&u, &p).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn l2_examples() {
        let p = diag();
        assert_eq!(l2_distance_sq(&p, &p).unwrap(), 0.0);
        let prod = product_of_marginals(&p);
        assert!((l2_distance_sq(&p, &prod).unwrap() - 0.25).abs() < 1e-15);
        let a = DiscreteJointTable::point_mass(2, 2, 0, 0);
        let b = DiscreteJointTable::point_mass(2, 2, 1, 1);
        assert_eq!(l2_distance_sq(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn chi_sq_examples() {
        let p = diag();
        assert_eq!(chi_sq_divergence(&p, &p).unwrap(), 0.0);
        let q = DiscreteJointTable::point_mass(2, 2, 0, 0);
        assert_eq!(chi_sq_divergence(&p, &q).unwrap(), f64::INFINITY);
        // Bernoulli(0.5) against Bernoulli(0.25) as 2×1 tables.
        let b1 = table(2, 1, &[0.5, 0.5]);
        let b2 = table(2, 1, &[0.25, 0.75]);
        assert!((chi_sq_divergence(&b1, &b2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // 0/0 cells contribute nothing.
        assert_eq!(chi_sq(&[0.0, 1.0], &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = DiscreteJointTable::uniform(2, 2);
        let b = DiscreteJointTable::uniform(2, 3);
        assert!(matches!(tv_distance(&a, &b), Err(CiError::Dimension { .. })));
        assert!(l2_distance_sq(&a, &b).is_err());
        assert!(chi_sq_divergence(&a, &b).is_err());
    }

    #[test]
    fn product_of_marginals_examples() {
        let u = DiscreteJointTable::uniform(2, 2);
        assert_eq!(product_of_marginals(&u), u);
        let prod = product_of_marginals(&diag());
        assert!(prod.probs().iter().all(|p| (p - 0.25).abs() < 1e-15));
        let r1 = DiscreteJointTable::outer(&[0.2, 0.3, 0.5], &[0.6, 0.4]).unwrap();
        let back = product_of_marginals(&r1);
        for (a, b) in back.probs().iter().zip(r1.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    struct Independent;
    impl ConditionalDiscreteModel for Independent {
        fn shape(&self) -> (usize, usize) {
            (2, 3)
        }
        fn table_at(&self, z: f64) -> DiscreteJointTable {
            DiscreteJointTable::outer(&[z / 2.0 + 0.25, 0.75 - z / 2.0], &[0.2, 0.3 + 0.1 * z, 0.5 - 0.1 * z])
                .unwrap()
        }
    }

    #[test]
    fn ci_distance_of_independent_model_vanishes() {
        let v = model_ci_distance(ModelRef::Discrete(&Independent), QuadratureSpec::default()).unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn odd_quadrature_grid_is_rejected() {
        let spec = QuadratureSpec { points: 7, tolerance: None };
        assert!(model_ci_distance(ModelRef::Discrete(&Independent), spec).is_err());
    }

    fn random_table(ell1: usize, ell2: usize) -> impl Strategy<Value = DiscreteJointTable> {
        prop::collection::vec(0.0f64..1.0, ell1 * ell2).prop_filter_map("zero mass", move |w| {
            DiscreteJointTable::from_weights(ell1, ell2, w).ok()
        })
    }

    fn pair() -> impl Strategy<Value = (DiscreteJointTable, DiscreteJointTable)> {
        (1usize..5, 1usize..5).prop_flat_map(|(a, b)| (random_table(a, b), random_table(a, b)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn tv_squared_is_bounded_by_chi_sq((p, q) in pair()) {
            let chi = chi_sq_divergence(&p, &q).unwrap();
            prop_assume!(chi.is_finite());
            let tv = tv_distance(&p, &q).unwrap();
            let l1 = 2.0 * tv;
            prop_assert!(tv * tv <= chi + 1e-12);
            prop_assert!(l1 * l1 <= chi + 1e-12);
            prop_assert!(chi >= 0.0);
        }
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(
            (p, q, r) in (1usize..5, 1usize..5)
                .prop_flat_map(|(a, b)| (random_table(a, b), random_table(a, b), random_table(a, b)))
        ) {
            let pq = tv_distance(&p, &q).unwrap();
            prop_assert_eq!(pq, tv_distance(&q, &p).unwrap());
            prop_assert!(tv_distance(&p, &p).unwrap() < 1e-12);
            prop_assert!(pq <= tv_distance(&p, &r).unwrap() + tv_distance(&r, &q).unwrap() + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        }

        #[test]
        fn chi_sq_vanishes_only_on_equal_tables((p, q) in pair()) {
            let chi = chi_sq_divergence(&p, &q).unwrap();
            prop_assert!(chi >= 0.0);
            if chi.is_finite() && chi < 1e-24 {
                prop_assert!(tv_distance(&p, &q).unwrap() < 1e-10);
            }
            prop_assert_eq!(chi_sq_divergence(&p, &p).unwrap(), 0.0);
        }

        #[test]
        fn product_tables_are_fixed_points(
            px in prop::collection::vec(0.01f64..1.0, 1..5),
            py in prop::collection::vec(0.01f64..1.0, 1..5),
        ) {
            let sx: f64 = px.iter().sum();
            let sy: f64 = py.iter().sum();
            let px: Vec<f64> = px.iter().map(|v| v / sx).collect();
            let py: Vec<f64> = py.iter().map(|v| v / sy).collect();
            let p = DiscreteJointTable::from_weights(
                px.len(), py.len(),
                px.iter().flat_map(|a| py.iter().map(move |b| a * b)).collect(),
            ).unwrap();
            prop_assert!(l2_distance_sq(&p, &product_of_marginals(&p)).unwrap() < 1e-12);
        }

        #[test]
        fn non_product_tables_are_detected(p in random_table(2, 2)) {
            let d = l2_distance_sq(&p, &product_of_marginals(&p)).unwrap();
            // For 2×2 tables the distance is 4·det², with det = p00 p11 − p01 p10.
            let det = p.get(0, 0) * p.get(1, 1) - p.get(0, 1) * p.get(1, 0);
            prop_assert!((d - 4.0 * det * det).abs() < 1e-12);
        }
    }
}
