//! Equal-width Z partitions, X/Y discretization, and support estimation.
//!
//! Cells are half-open `[(i−1)/d, i/d)` with the top cell closed at 1. Cell
//! and category indices are 0-based; two-dimensional cells are row-major in
//! `(z₁, z₂)`.

use serde::{Deserialize, Serialize};

use crate::data::{Column, TripleDataset};
use crate::error::{CiError, Result};
use crate::ustat::DiscretePairSample;

/// `⌈x⌉`, treating values within `1e-9` relative of an integer as that integer,
/// so `32^{0.4}` and `1000^{1/3}` do not round up past their exact value.
pub fn robust_ceil(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r.max(0.0) as usize
    } else {
        x.ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPlan {
    /// Bins per Z axis.
    pub d: usize,
    pub d_z: usize,
    /// X/Y discretization level in continuous mode.
    pub d_prime: Option<usize>,
    /// One `[lo, hi]` interval per Z axis.
    pub support: Vec<(f64, f64)>,
    /// `d·max(ℓ₁, ℓ₂) ≤ n` for the scaling plan; `None` elsewhere.
    pub rate_condition: Option<bool>,
}

impl BinPlan {
    fn unit(d: usize, d_z: usize) -> Self {
        Self {
            d: d.max(1),
            d_z,
            d_prime: None,
            support: vec![(0.0, 1.0); d_z],
            rate_condition: None,
        }
    }

    pub fn cells(&self) -> usize {
        self.d.pow(self.d_z as u32)
    }

    /// `d^{d_z/2}`, the multivariate threshold scale.
    pub fn threshold_scale(&self) -> f64 {
        (self.d as f64).powf(self.d_z as f64 / 2.0)
    }
}

pub fn fixed_discrete_plan(n: usize) -> BinPlan {
    BinPlan::unit(robust_ceil((n.max(1) as f64).powf(0.4)), 1)
}

pub fn scaling_discrete_plan(n: usize, ell1: usize, ell2: usize) -> BinPlan {
    let n = n.max(1);
    let l = (ell1.max(1) * ell2.max(1)) as f64;
    let d = robust_ceil((n as f64).powf(0.4) / l.powf(0.2)).max(1);
    let mut plan = BinPlan::unit(d, 1);
    plan.rate_condition = Some(d * ell1.max(ell2) <= n);
    plan
}

pub fn continuous_plan(n: usize, s: f64) -> Result<BinPlan> {
    multivariate_plan(n, 1, Some(s))
}

/// Per-axis `d = ⌈n^{2s/((4+d_z)s+2)}⌉`; with `s = None` (discrete X, Y)
/// the exponent's `s → ∞` limit `2/(4+d_z)` is used and no `d'` is set.
pub fn multivariate_plan(n: usize, d_z: usize, s: Option<f64>) -> Result<BinPlan> {
    if d_z == 0 || d_z > 2 {
        return Err(CiError::UnsupportedDimension(d_z));
    }
    let n = n.max(1) as f64;
    match s {
        Some(s) => {
            if !(s > 0.0) || !s.is_finite() {
                return Err(CiError::InvalidConfig(format!("smoothness must be positive, got {s}")));
            }
            let d = robust_ceil(n.powf(2.0 * s / ((4.0 + d_z as f64) * s + 2.0))).max(1);
            let mut plan = BinPlan::unit(d, d_z);
            plan.d_prime = Some(robust_ceil((d as f64).powf(1.0 / s)).max(1));
            Ok(plan)
        }
        None => Ok(BinPlan::unit(robust_ceil(n.powf(2.0 / (4.0 + d_z as f64))), d_z)),
    }
}

/// `d = min(⌈μ^{4/5} n^{2/5}⌉, ⌈μ^{8/15} n^{8/15}⌉)` over `[lo, hi]`, `μ = hi − lo`.
pub fn unbounded_plan(n: usize, support: &SupportEstimate) -> BinPlan {
    let n = n.max(1) as f64;
    let mu = support.hi - support.lo;
    let a = robust_ceil(mu.powf(0.8) * n.powf(0.4));
    let b = robust_ceil(mu.powf(8.0 / 15.0) * n.powf(8.0 / 15.0));
    let mut plan = BinPlan::unit(a.min(b), 1);
    plan.support = vec![(support.lo, support.hi)];
    plan
}

fn axis_cell(v: f64, lo: f64, hi: f64, d: usize) -> Result<usize> {
    if !(v >= lo && v <= hi) {
        return Err(CiError::OutOfSupport { value: v, lo, hi });
    }
    let width = hi - lo;
    if width <= 0.0 {
        return Ok(0);
    }
    let k = ((v - lo) / width * d as f64).floor() as usize;
    Ok(k.min(d - 1))
}

/// 0-based cell index of `z` under `plan`.
pub fn assign_bin(z: &[f64], plan: &BinPlan) -> Result<usize> {
    if z.len() != plan.d_z {
        return Err(CiError::Dimension {
            expected: format!("{}-dimensional z", plan.d_z),
            got: z.len().to_string(),
        });
    }
    let mut idx = 0;
    for (v, &(lo, hi)) in z.iter().zip(&plan.support) {
        idx = idx * plan.d + axis_cell(*v, lo, hi, plan.d)?;
    }
    Ok(idx)
}

/// 0-based category of `v ∈ [0, 1]` among `d'` equal cells.
pub fn discretize_xy(v: f64, d_prime: usize) -> Result<u32> {
    Ok(axis_cell(v, 0.0, 1.0, d_prime.max(1))? as u32)
}

/// Discretizes continuous X and Y into `d'` categories each.
pub fn discretize_dataset(data: &TripleDataset, d_prime: usize) -> Result<TripleDataset> {
    let disc = |c: &Column| -> Result<Column> {
        match c {
            Column::Continuous(v) => Ok(Column::Categorical {
                values: v.iter().map(|x| discretize_xy(*x, d_prime)).collect::<Result<_>>()?,
                levels: d_prime as u32,
            }),
            Column::Categorical { .. } => Err(CiError::ModeMismatch(
                "continuous mode needs real-valued x and y".into(),
            )),
        }
    };
    TripleDataset::new(disc(&data.x)?, disc(&data.y)?, data.z.clone(), data.z_dim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedDataset {
    pub bins: Vec<DiscretePairSample>,
    pub sigma: Vec<usize>,
    pub plan: BinPlan,
}

impl BinnedDataset {
    pub fn total(&self) -> usize {
        self.sigma.iter().sum()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.bins.first().map(|b| (b.ell1, b.ell2)).unwrap_or((1, 1))
    }
}

pub fn categorical_parts(data: &TripleDataset) -> Result<(&[u32], usize, &[u32], usize)> {
    match (&data.x, &data.y) {
        (
            Column::Categorical { values: xs, levels: l1 },
            Column::Categorical { values: ys, levels: l2 },
        ) => Ok((xs, *l1 as usize, ys, *l2 as usize)),
        _ => Err(CiError::ModeMismatch("binning needs categorical x and y".into())),
    }
}

pub fn bin_dataset(data: &TripleDataset, plan: &BinPlan) -> Result<BinnedDataset> {
    let (xs, ell1, ys, ell2) = categorical_parts(data)?;
    if data.z_dim != plan.d_z {
        return Err(CiError::Dimension {
            expected: format!("{}-dimensional z", plan.d_z),
            got: data.z_dim.to_string(),
        });
    }
    let mut bins = vec![DiscretePairSample::empty(ell1, ell2); plan.cells()];
    for i in 0..data.len() {
        let m = assign_bin(data.z_point(i), plan)?;
        bins[m].push(xs[i], ys[i]);
    }
    let sigma = bins.iter().map(|b| b.len()).collect();
    Ok(BinnedDataset {
        bins,
        sigma,
        plan: plan.clone(),
    })
}

/// Like [`bin_dataset`] but silently drops observations outside the support.
pub fn bin_dataset_clipped(data: &TripleDataset, plan: &BinPlan) -> Result<BinnedDataset> {
    let keep: Vec<usize> = (0..data.len())
        .filter(|&i| {
            data.z_point(i)
                .iter()
                .zip(&plan.support)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
        })
        .collect();
    bin_dataset(&data.select(&keep), plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEstimate {
    pub lo: f64,
    pub hi: f64,
    pub coverage_target: f64,
    pub count_threshold: usize,
}

/// Shortest interval holding `k = ⌈n(1−η) + C√(n ln n)⌉` points, `k` clipped to `[1, n]`.
pub fn estimate_support(z_half: &[f64], eta: f64, c_const: f64) -> Result<SupportEstimate> {
    if z_half.is_empty() {
        return Err(CiError::EmptyInput);
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(CiError::InvalidConfig(format!("eta must lie in (0, 1], got {eta}")));
    }
    let n = z_half.len() as f64;
    let k = (n * (1.0 - eta) + c_const * (n * n.ln()).sqrt()).ceil();
    let k = (k.max(1.0) as usize).min(z_half.len());
    let mut est = shortest_window(z_half, k)?;
    est.coverage_target = eta;
    Ok(est)
}

/// Shortest window over consecutive order statistics containing `k` points.
pub fn shortest_window(values: &[f64], k: usize) -> Result<SupportEstimate> {
    if values.is_empty() {
        return Err(CiError::EmptyInput);
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CiError::InvalidConfig(format!("non-finite z value {v}")));
    }
    let k = k.clamp(1, values.len());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut best, mut lo) = (f64::INFINITY, 0);
    for i in 0..=sorted.len() - k {
        let w = sorted[i + k - 1] - sorted[i];
        if w < best {
            best = w;
            lo = i;
        }
    }
    Ok(SupportEstimate {
        lo: sorted[lo],
        hi: sorted[lo + k - 1],
        coverage_target: 0.0,
        count_threshold: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn robust_ceil_snaps_exact_powers() {
        assert_eq!(robust_ceil(32f64.powf(0.4)), 4);
        assert_eq!(robust_ceil(1000f64.powf(1.0 / 3.0)), 10);
        assert_eq!(robust_ceil(4.2), 5);
    }

    #[test]
    fn plan_examples() {
        assert_eq!(fixed_discrete_plan(1000).d, 16);
        assert_eq!(fixed_discrete_plan(1).d, 1);
        assert_eq!(fixed_discrete_plan(32).d, 4);

        assert_eq!(scaling_discrete_plan(1000, 2, 3).d, 12);
        assert_eq!(scaling_discrete_plan(777, 1, 1).d, fixed_discrete_plan(777).d);
        assert_eq!(scaling_discrete_plan(1000, 500, 2).rate_condition, Some(false));
        assert_eq!(scaling_discrete_plan(1000, 2, 3).rate_condition, Some(true));

        let c = continuous_plan(1000, 1.0).unwrap();
        assert_eq!((c.d, c.d_prime), (8, Some(8)));
        let c = continuous_plan(1000, 2.0).unwrap();
        assert_eq!((c.d, c.d_prime), (10, Some(4)));
        // d^{1/s} sits just above 1 for huge s, so its ceiling is 2.
        let c = continuous_plan(1000, 1e6).unwrap();
        assert_eq!(c.d_prime, Some(2));
        assert_eq!(continuous_plan(1, 1e6).unwrap().d_prime, Some(1));

        assert_eq!(multivariate_plan(1000, 1, Some(1.0)).unwrap(), continuous_plan(1000, 1.0).unwrap());
        assert_eq!(multivariate_plan(1000, 2, Some(1.0)).unwrap().d, 6);
        assert!(matches!(multivariate_plan(1000, 3, Some(1.0)), Err(CiError::UnsupportedDimension(3))));
        assert_eq!(multivariate_plan(1000, 1, None).unwrap().d, 16);
        assert_eq!(multivariate_plan(1000, 2, None).unwrap().cells(), 100);
    }

    #[test]
    fn bin_boundaries() {
        let p = fixed_discrete_plan(1000);
        assert_eq!(assign_bin(&[0.0], &p).unwrap(), 0);
        assert_eq!(assign_bin(&[1.0], &p).unwrap(), 15);
        assert_eq!(assign_bin(&[0.5], &p).unwrap(), 8);
        assert!(matches!(assign_bin(&[1.0001], &p), Err(CiError::OutOfSupport { .. })));
        assert!(assign_bin(&[f64::NAN], &p).is_err());

        let p2 = BinPlan::unit(4, 2);
        assert_eq!(assign_bin(&[0.0, 1.0], &p2).unwrap(), 3);
        assert_eq!(assign_bin(&[1.0, 0.0], &p2).unwrap(), 12);
    }

    #[test]
    fn discretize_examples() {
        assert_eq!(discretize_xy(0.0, 8).unwrap(), 0);
        assert_eq!(discretize_xy(1.0, 8).unwrap(), 7);
        assert_eq!(discretize_xy(0.5, 8).unwrap(), 4);
        assert_eq!(discretize_xy(0.73, 1).unwrap(), 0);
    }

    fn cat_data(z: Vec<f64>) -> TripleDataset {
        let n = z.len();
        TripleDataset::new(
            Column::Categorical { values: vec![0; n], levels: 2 },
            Column::Categorical { values: vec![1; n], levels: 2 },
            z,
            1,
        )
        .unwrap()
    }

    #[test]
    fn binning_examples() {
        let p = BinPlan::unit(10, 1);
        let b = bin_dataset(&cat_data(vec![]), &p).unwrap();
        assert!(b.sigma.iter().all(|s| *s == 0));

        let b = bin_dataset(&cat_data(vec![0.31; 50]), &p).unwrap();
        assert_eq!(b.sigma[3], 50);
        assert_eq!(b.total(), 50);

        let mut r = rng::seeded(3);
        let n = 10_000;
        let b = bin_dataset(&cat_data((0..n).map(|_| r.random::<f64>()).collect()), &p).unwrap();
        let bound = 4.0 * (n as f64 / 10.0).sqrt();
        assert!(b.sigma.iter().all(|&s| (s as f64 - 1000.0).abs() <= bound));
    }

    #[test]
    fn support_examples() {
        let z = [0.0, 0.1, 0.2, 0.3, 0.4, 0.9];
        let s = shortest_window(&z, 5).unwrap();
        assert_eq!((s.lo, s.hi), (0.0, 0.4));
        let s = shortest_window(&z, 6).unwrap();
        assert_eq!((s.lo, s.hi), (0.0, 0.9));
        assert!(estimate_support(&[], 0.05, 1.0).is_err());
        let s = estimate_support(&z, 1.0, 0.0).unwrap();
        assert_eq!(s.count_threshold, 1);
    }

    proptest! {
        #[test]
        fn shortest_window_is_optimal(v in prop::collection::vec(-10.0f64..10.0, 1..100), k in 1usize..100) {
            let k = k.min(v.len());
            let s = shortest_window(&v, k).unwrap();
            let inside = v.iter().filter(|x| **x >= s.lo && **x <= s.hi).count();
            prop_assert!(inside >= k);
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            for i in 0..=sorted.len() - k {
                prop_assert!(sorted[i + k - 1] - sorted[i] >= s.hi - s.lo);
            }
        }

        #[test]
        fn every_point_has_one_cell(z in 0.0f64..=1.0, d in 1usize..300) {
            let p = BinPlan::unit(d, 1);
            let m = assign_bin(&[z], &p).unwrap();
            prop_assert!(m < d);
            let lo = m as f64 / d as f64;
            let hi = (m + 1) as f64 / d as f64;
            prop_assert!(z >= lo - 1e-15 && (z < hi + 1e-15));
        }

        #[test]
        fn plans_are_monotone_in_n(n in 1usize..100_000, l1 in 1usize..10, l2 in 1usize..10, s in 0.2f64..4.0) {
            prop_assert!(fixed_discrete_plan(n).d <= fixed_discrete_plan(n + 1).d);
            prop_assert!(scaling_discrete_plan(n, l1, l2).d <= scaling_discrete_plan(n + 1, l1, l2).d);
            prop_assert!(continuous_plan(n, s).unwrap().d <= continuous_plan(n + 1, s).unwrap().d);
            prop_assert!(multivariate_plan(n, 2, Some(s)).unwrap().d <= multivariate_plan(n + 1, 2, Some(s)).unwrap().d);
        }
    }
}
