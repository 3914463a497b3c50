//! Within-bin permutation calibration.
//!
//! Each replication shuffles the X values inside every Z-bin while keeping Y
//! and bin membership fixed, then recomputes the statistic. Replication `i`
//! draws from `rng::stream(base, [i])`, so the p-value does not depend on how
//! the replications are scheduled.

use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::BinnedDataset;
use crate::rng;

/// Fresh uniform permutation of the x-values of every bin.
pub fn within_bin_permute(binned: &BinnedDataset, rng: &mut dyn RngCore) -> BinnedDataset {
    let mut out = binned.clone();
    for bin in &mut out.bins {
        bin.xs.shuffle(rng);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub p_value: f64,
    pub observed: f64,
    pub reference: Vec<f64>,
}

/// `M⁻¹ Σ 1(T_i > T)`, or `(1 + Σ 1(T_i ≥ T)) / (M + 1)` when `conservative`.
pub fn pvalue_from_reference(observed: f64, reference: &[f64], conservative: bool) -> f64 {
    let m = reference.len() as f64;
    if conservative {
        let ge = reference.iter().filter(|t| **t >= observed).count() as f64;
        (1.0 + ge) / (m + 1.0)
    } else {
        let gt = reference.iter().filter(|t| **t > observed).count() as f64;
        gt / m
    }
}

/// Computes the statistic on `binned` and on `permutations` within-bin
/// permutations of it; `base_seed` keys the permutation streams.
pub fn permutation_pvalue<F>(
    binned: &BinnedDataset,
    statistic: F,
    permutations: usize,
    conservative: bool,
    base_seed: u64,
) -> PermutationResult
where
    F: Fn(&BinnedDataset) -> f64 + Sync,
{
    let observed = statistic(binned);
    let reference: Vec<f64> = (0..permutations.max(1) as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(base_seed, &[i]);
            statistic(&within_bin_permute(binned, &mut r))
        })
        .collect();
    PermutationResult {
        p_value: pvalue_from_reference(observed, &reference, conservative),
        observed,
        reference,
    }
}
