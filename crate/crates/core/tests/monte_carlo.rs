//! Monte Carlo and quadrature checks that are too slow or too statistical for
//! the unit tests.

use citest_core::binning::{assign_bin, bin_dataset, estimate_support, fixed_discrete_plan};
use citest_core::citests::{statistic, StatisticKind};
use citest_core::distributions::{
    model_ci_distance, product_of_marginals, ConditionalDiscreteModel, ModelRef, QuadratureSpec,
};
use citest_core::flatten::{split_distance_sq, weighted_u_statistic};
use citest_core::generators::{discrete_alt, discrete_null};
use citest_core::harness::{run_experiment, ExperimentSpec, GeneratorSpec};
use citest_core::{
    rng, Calibration, Column, DiscreteJointTable, DiscretePairSample, FlatteningWeights, SplitPlan, TestConfig,
    TestMode, TripleDataset,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// `∫₀¹ Σ |p − p_X p_Y| dz` for the non-factorizing 2×3 family, from scipy's
/// adaptive quadrature (reported error 1e-14).
const ALT_CI_DISTANCE: f64 = 0.2964056717659376;

#[test]
fn alternative_family_ci_distance() {
    let v = model_ci_distance(ModelRef::Discrete(&discrete_alt()), QuadratureSpec::default()).unwrap();
    assert!((v.value - ALT_CI_DISTANCE).abs() < 1e-8, "{}", v.value);
    let n = model_ci_distance(ModelRef::Discrete(&discrete_null()), QuadratureSpec::default()).unwrap();
    assert!(n.value < 1e-12);
}

#[test]
fn weighted_statistic_mean_on_diagonal_table() {
    let p = DiscreteJointTable::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
    let w = FlatteningWeights { ax: vec![1, 0], ay: vec![2, 1] };
    let target = split_distance_sq(&p, &product_of_marginals(&p), &w).unwrap();
    let mut g = rng::seeded(229);
    let reps = 100_000;
    let mut vals = Vec::with_capacity(reps);
    for _ in 0..reps {
        let mut dxy = DiscretePairSample::empty(2, 2);
        for _ in 0..8 {
            let (x, y) = p.sample_cell(&mut g);
            dxy.push(x, y);
        }
        let plan = SplitPlan { dx: vec![], dy: vec![], dxy, t: 0, t1: 0, t2: 0 };
        vals.push(weighted_u_statistic(&plan, &w).unwrap());
    }
    let mean = vals.iter().sum::<f64>() / reps as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    assert!((mean - target).abs() <= 3.0 * sd / (reps as f64).sqrt(), "{mean} vs {target}");
}

#[test]
fn uniform_bins_concentrate() {
    let mut g = rng::seeded(344);
    let n = 10_000;
    // ⌈316^{0.4}⌉ = 10 bins.
    let plan = fixed_discrete_plan(316);
    let d = plan.d;
    assert_eq!(d, 10);
    let mut counts = vec![0usize; d];
    for _ in 0..n {
        counts[assign_bin(&[g.random::<f64>()], &plan).unwrap()] += 1;
    }
    let expected = n as f64 / d as f64;
    for c in counts {
        assert!((c as f64 - expected).abs() <= 4.0 * expected.sqrt(), "{c}");
    }
}

#[test]
fn support_estimate_covers_fresh_samples() {
    let trials = 200;
    let n = 10_000;
    let eta = 0.05;
    let mut good = 0;
    for t in 0..trials {
        let mut g = rng::stream(353, &[t]);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut g)).collect();
        let s = estimate_support(&z, eta, 1.0).unwrap();
        let fresh = (0..n).filter(|_| {
            let v: f64 = StandardNormal.sample(&mut g);
            v >= s.lo && v <= s.hi
        });
        if fresh.count() as f64 >= (1.0 - eta) * n as f64 {
            good += 1;
        }
    }
    assert!(good as f64 >= 0.95 * trials as f64, "{good}/{trials}");
}

#[test]
fn fixed_statistic_scales_with_sample_size() {
    // Diagonal table independent of z: each bin's U estimates 0.25, so T ≈ N/4.
    let n = 400;
    let plan = fixed_discrete_plan(32);
    assert_eq!(plan.d, 4);
    let mut runs = Vec::new();
    for r in 0..50 {
        let mut g = rng::stream(410, &[r]);
        let xs: Vec<u32> = (0..n).map(|_| g.random_range(0..2)).collect();
        let z: Vec<f64> = (0..n).map(|_| g.random()).collect();
        let data = TripleDataset::new(
            Column::Categorical { values: xs.clone(), levels: 2 },
            Column::Categorical { values: xs, levels: 2 },
            z,
            1,
        )
        .unwrap();
        runs.push(statistic(&bin_dataset(&data, &plan).unwrap(), StatisticKind::Unweighted).0);
    }
    let mean = runs.iter().sum::<f64>() / runs.len() as f64;
    assert!(mean > 0.0 && (mean / (n as f64 * 0.25) - 1.0).abs() < 0.2, "{mean}");
}

#[test]
fn permutation_size_on_null_family() {
    let spec = ExperimentSpec {
        generator: GeneratorSpec::DiscreteNull,
        sizes: vec![500],
        replications: 500,
        config: TestConfig {
            mode: TestMode::ScalingDiscrete,
            calibration: Calibration::Permutation { permutations: 100, conservative: false },
            alpha: 0.05,
            poissonize: false,
            ..TestConfig::default()
        },
        seed: 478,
    };
    let rate = run_experiment(&spec).unwrap().rows[0].rejection_rate;
    assert!(rate <= 0.08, "{rate}");
}

#[test]
fn null_family_sampler_matches_tables() {
    let model = discrete_null();
    let n = 10_000;
    let strata = 5;
    let data = model.sample(n, &mut rng::seeded(533));
    let (Column::Categorical { values: xs, .. }, Column::Categorical { values: ys, .. }) = (&data.x, &data.y) else {
        unreachable!()
    };
    let mut stat = 0.0;
    let mut cells = 0;
    for s in 0..strata {
        let (lo, hi) = (s as f64 / strata as f64, (s + 1) as f64 / strata as f64);
        let mut counts = [0usize; 6];
        for i in 0..n {
            if data.z[i] >= lo && data.z[i] < hi {
                counts[(xs[i] * 3 + ys[i]) as usize] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        // Stratum-averaged table by midpoint quadrature.
        let mut avg = [0.0; 6];
        for k in 0..200 {
            let t = model.table_at(lo + (k as f64 + 0.5) * (hi - lo) / 200.0);
            for (a, p) in avg.iter_mut().zip(t.probs()) {
                *a += p / 200.0;
            }
        }
        for (c, p) in counts.iter().zip(avg) {
            let e = total as f64 * p;
            stat += (*c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    let df = (cells - strata) as f64;
    let pval = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
    assert!(pval > 1e-3, "χ² = {stat}, p = {pval}");
}
