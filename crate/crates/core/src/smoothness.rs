//! Grid estimates of how fast conditional laws move with `z`, and randomized
//! checks of the inequalities relating the smoothness classes.
//!
//! Distances are L1 norms (twice total variation) throughout.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    chi_sq, l1_norm_diff, product_of_marginals, ConditionalDiscreteModel, ContinuousConditionalModel,
    DiscreteJointTable, DiscreteMarginalPair,
};
use crate::error::{CiError, Result};

/// Grids larger than this only compare neighbouring points.
pub const ALL_PAIRS_MAX_GRID: usize = 128;

const MIN_DZ: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessClass {
    /// Marginal L1 per unit of `z`, worst of X and Y.
    Tv,
    /// Squared marginal L1 per unit of `z`.
    TvSquared,
    /// Marginal χ² per unit of `z`.
    ChiSquared,
    /// Joint L1 of (X, Y) per unit of `z`.
    JointTv,
}

impl SmoothnessClass {
    pub const ALL: [SmoothnessClass; 4] = [Self::Tv, Self::TvSquared, Self::ChiSquared, Self::JointTv];

    pub fn name(self) -> &'static str {
        match self {
            Self::Tv => "tv",
            Self::TvSquared => "tv_squared",
            Self::ChiSquared => "chi_squared",
            Self::JointTv => "joint_tv",
        }
    }
}

impl std::str::FromStr for SmoothnessClass {
    type Err = CiError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|c| c.name() == norm)
            .or(match norm.as_str() {
                "tv2" => Some(Self::TvSquared),
                "chi2" => Some(Self::ChiSquared),
                _ => None,
            })
            .ok_or_else(|| CiError::InvalidConfig(format!("unknown smoothness class '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStrategy {
    AllPairs,
    Adjacent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub class: SmoothnessClass,
    pub constant: f64,
    pub grid_size: usize,
    pub strategy: PairStrategy,
}

/// Conditional law of (X, Y) given `z`, seen through a finite table.
pub trait ConditionalLaw: Sync {
    fn joint(&self, z: f64) -> DiscreteJointTable;

    fn marginals(&self, z: f64) -> DiscreteMarginalPair {
        self.joint(z).marginals()
    }
}

pub struct DiscreteLaw<'a>(pub &'a dyn ConditionalDiscreteModel);

impl ConditionalLaw for DiscreteLaw<'_> {
    fn joint(&self, z: f64) -> DiscreteJointTable {
        self.0.table_at(z)
    }
}

/// A continuous model on `[0, 1]²` cut into `cells × cells` squares.
/// Marginals come straight from the model's interval masses.
pub struct GridLaw<'a> {
    pub model: &'a dyn ContinuousConditionalModel,
    pub cells: usize,
}

impl GridLaw<'_> {
    fn edges(&self) -> Vec<(f64, f64)> {
        let k = self.cells as f64;
        (0..self.cells).map(|i| (i as f64 / k, (i + 1) as f64 / k)).collect()
    }
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    for p in v.iter_mut() {
        *p = p.max(0.0);
    }
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|p| *p /= s);
    }
    v
}

impl ConditionalLaw for GridLaw<'_> {
    fn joint(&self, z: f64) -> DiscreteJointTable {
        let e = self.edges();
        let mut w = Vec::with_capacity(self.cells * self.cells);
        for &x in &e {
            for &y in &e {
                w.push(self.model.cell_mass(x, y, z).max(0.0));
            }
        }
        DiscreteJointTable::from_weights(self.cells, self.cells, w).expect("model puts mass on [0,1]²")
    }

    fn marginals(&self, z: f64) -> DiscreteMarginalPair {
        let e = self.edges();
        DiscreteMarginalPair {
            px: normalized(e.iter().map(|&(a, b)| self.model.marginal_x_mass(a, b, z)).collect()),
            py: normalized(e.iter().map(|&(a, b)| self.model.marginal_y_mass(a, b, z)).collect()),
        }
    }
}

enum Snapshot {
    Marginals(DiscreteMarginalPair),
    Joint(DiscreteJointTable),
}

fn rate(class: SmoothnessClass, a: &Snapshot, b: &Snapshot, dz: f64) -> f64 {
    let dz = dz.abs();
    match (class, a, b) {
        (SmoothnessClass::JointTv, Snapshot::Joint(p), Snapshot::Joint(q)) => l1_norm_diff(p.probs(), q.probs()) / dz,
        (SmoothnessClass::Tv, Snapshot::Marginals(p), Snapshot::Marginals(q)) => {
            l1_norm_diff(&p.px, &q.px).max(l1_norm_diff(&p.py, &q.py)) / dz
        }
        (SmoothnessClass::TvSquared, Snapshot::Marginals(p), Snapshot::Marginals(q)) => {
            l1_norm_diff(&p.px, &q.px).powi(2).max(l1_norm_diff(&p.py, &q.py).powi(2)) / dz
        }
        (SmoothnessClass::ChiSquared, Snapshot::Marginals(p), Snapshot::Marginals(q)) => {
            let worst = chi_sq(&p.px, &q.px).max(chi_sq(&q.px, &p.px)).max(chi_sq(&p.py, &q.py)).max(chi_sq(&q.py, &p.py));
            worst / dz.max(MIN_DZ)
        }
        _ => unreachable!("snapshot kind follows the class"),
    }
}

pub fn strategy_for(grid_size: usize) -> PairStrategy {
    if grid_size <= ALL_PAIRS_MAX_GRID {
        PairStrategy::AllPairs
    } else {
        PairStrategy::Adjacent
    }
}

/// Largest distance-per-unit-`z` over the grid `z_i = i/(G−1)`.
pub fn empirical_lipschitz(law: &dyn ConditionalLaw, class: SmoothnessClass, grid_size: usize) -> Result<SmoothnessReport> {
    if grid_size < 2 {
        return Err(CiError::InvalidConfig(format!("grid needs at least 2 points, got {grid_size}")));
    }
    let step = 1.0 / (grid_size - 1) as f64;
    let zs: Vec<f64> = (0..grid_size).map(|i| i as f64 * step).collect();
    let snaps: Vec<Snapshot> = zs
        .par_iter()
        .map(|&z| match class {
            SmoothnessClass::JointTv => Snapshot::Joint(law.joint(z)),
            _ => Snapshot::Marginals(law.marginals(z)),
        })
        .collect();
    let strategy = strategy_for(grid_size);
    let constant = (0..grid_size - 1)
        .into_par_iter()
        .map(|i| {
            let last = match strategy {
                PairStrategy::AllPairs => grid_size,
                PairStrategy::Adjacent => i + 2,
            };
            (i + 1..last)
                .map(|j| rate(class, &snaps[i], &snaps[j], zs[j] - zs[i]))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(SmoothnessReport { class, constant, grid_size, strategy })
}

/// Counts of violated inequalities over random table pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub trials: usize,
    /// `‖p − q‖₁² ≤ χ²(p, q)`.
    pub l1_sq_below_chi_sq: usize,
    /// Product laws: joint L1 ≤ marginal L1 of X plus that of Y.
    pub product_subadditive: usize,
    /// Marginal L1 ≤ joint L1.
    pub marginal_below_joint: usize,
    /// Product laws: `1 + χ² = (1 + χ²_X)(1 + χ²_Y)`.
    pub product_chi_sq_identity: usize,
}

impl InclusionReport {
    pub fn all_hold(&self) -> bool {
        self.l1_sq_below_chi_sq + self.product_subadditive + self.marginal_below_joint + self.product_chi_sq_identity == 0
    }
}

fn random_table(rng: &mut dyn RngCore) -> DiscreteJointTable {
    let l1 = rng.random_range(1..=5);
    let l2 = rng.random_range(1..=5);
    random_table_of(l1, l2, rng)
}

fn random_table_of(l1: usize, l2: usize, rng: &mut dyn RngCore) -> DiscreteJointTable {
    loop {
        // Heavy-tailed weights with occasional exact zeros.
        let w: Vec<f64> = (0..l1 * l2)
            .map(|_| if rng.random::<f64>() < 0.1 { 0.0 } else { (-rng.random::<f64>().max(1e-300).ln()).powi(2) })
            .collect();
        if w.iter().any(|v| *v > 0.0) {
            return DiscreteJointTable::from_weights(l1, l2, w).expect("nonnegative weights");
        }
    }
}

fn within(a: f64, b: f64, rel: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() < 1e-15
}

/// Draws `trials` random pairs and checks each inequality once per pair.
pub fn check_inclusions(trials: usize, rng: &mut dyn RngCore) -> InclusionReport {
    const SLACK: f64 = 1e-12;
    let mut rep = InclusionReport { trials, ..Default::default() };
    for _ in 0..trials {
        let p = random_table(rng);
        let q = random_table_of(p.ell1(), p.ell2(), rng);
        let joint_l1 = l1_norm_diff(p.probs(), q.probs());
        if joint_l1 * joint_l1 > chi_sq(p.probs(), q.probs()) * (1.0 + SLACK) + SLACK {
            rep.l1_sq_below_chi_sq += 1;
        }
        let (mp, mq) = (p.marginals(), q.marginals());
        let (lx, ly) = (l1_norm_diff(&mp.px, &mq.px), l1_norm_diff(&mp.py, &mq.py));
        if lx.max(ly) > joint_l1 + SLACK {
            rep.marginal_below_joint += 1;
        }
        let (pp, pq) = (product_of_marginals(&p), product_of_marginals(&q));
        if l1_norm_diff(pp.probs(), pq.probs()) > lx + ly + SLACK {
            rep.product_subadditive += 1;
        }
        let (cx, cy) = (chi_sq(&mp.px, &mq.px), chi_sq(&mp.py, &mq.py));
        // `∞ · 0` would give NaN when one marginal has infinite divergence.
        let rhs = if cx.is_finite() && cy.is_finite() { cx + cy + cx * cy } else { f64::INFINITY };
        if !within(chi_sq(pp.probs(), pq.probs()), rhs, 1e-9) {
            rep.product_chi_sq_identity += 1;
        }
    }
    rep
}
