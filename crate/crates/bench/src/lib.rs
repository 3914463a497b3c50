//! Input builders shared by the benchmarks.

use citest_core::generators::discrete_null;
use citest_core::binning::{bin_dataset, scaling_discrete_plan};
use citest_core::distributions::ConditionalDiscreteModel;
use citest_core::{rng, BinnedDataset, DiscretePairSample};
use rand::Rng;

/// `n` uniform draws on an `ell1 × ell2` grid.
pub fn uniform_pairs(n: usize, ell1: usize, ell2: usize, seed: u64) -> DiscretePairSample {
    let mut g = rng::seeded(seed);
    let mut s = DiscretePairSample::empty(ell1, ell2);
    for _ in 0..n {
        s.push(g.random_range(0..ell1 as u32), g.random_range(0..ell2 as u32));
    }
    s
}

/// Weights in the shape the flattened statistic uses: `1 + count`.
pub fn flatten_weights(len: usize, seed: u64) -> Vec<f64> {
    let mut g = rng::seeded(seed);
    (0..len).map(|_| 1.0 + g.random_range(0..5) as f64).collect()
}

/// Null-family sample of size `n`, binned for the scaling discrete test.
pub fn binned_null(n: usize, seed: u64) -> BinnedDataset {
    let model = discrete_null();
    let data = model.sample(n, &mut rng::seeded(seed));
    let (ell1, ell2) = model.shape();
    bin_dataset(&data, &scaling_discrete_plan(n, ell1, ell2)).expect("binning the null sample")
}
