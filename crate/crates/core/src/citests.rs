//! The binned conditional-independence tests.
//!
//! Every mode runs the same pipeline: Poissonize the sample size, (for real
//! X, Y) discretize to `d'` levels, bin on Z, sum per-bin U-statistics, and
//! decide by a fixed threshold or by within-bin permutation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::binning::{
    self, bin_dataset, bin_dataset_clipped, categorical_parts, discretize_dataset, BinPlan, BinnedDataset,
};
use crate::calibration::permutation_pvalue;
use crate::data::{Column, TripleDataset};
use crate::error::{CiError, Result};
use crate::flatten::{omega_weight, weighted_u_of_slices};
use crate::rng;
use crate::ustat::u_from_slices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    FixedDiscrete,
    ScalingDiscrete,
    Continuous,
    Multivariate,
    Unbounded,
}

impl TestMode {
    pub const ALL: [TestMode; 5] = [
        TestMode::FixedDiscrete,
        TestMode::ScalingDiscrete,
        TestMode::Continuous,
        TestMode::Multivariate,
        TestMode::Unbounded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestMode::FixedDiscrete => "fixed_discrete",
            TestMode::ScalingDiscrete => "scaling_discrete",
            TestMode::Continuous => "continuous",
            TestMode::Multivariate => "multivariate",
            TestMode::Unbounded => "unbounded",
        }
    }
}

impl fmt::Display for TestMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestMode {
    type Err = CiError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        TestMode::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| CiError::InvalidConfig(format!("unknown test mode '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Calibration {
    FixedThreshold,
    Permutation { permutations: usize, conservative: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub mode: TestMode,
    pub s: Option<f64>,
    pub zeta: Option<f64>,
    pub calibration: Calibration,
    pub alpha: f64,
    pub seed: u64,
    pub eta: Option<f64>,
    pub c_const: Option<f64>,
    /// Test on the first `N ~ Poisson(n/2)` observations; when false all `n` are used.
    #[serde(default = "default_poissonize")]
    pub poissonize: bool,
}

fn default_poissonize() -> bool {
    true
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            mode: TestMode::FixedDiscrete,
            s: None,
            zeta: None,
            calibration: Calibration::Permutation {
                permutations: 100,
                conservative: false,
            },
            alpha: 0.05,
            seed: 0,
            eta: None,
            c_const: None,
            poissonize: true,
        }
    }
}

impl TestConfig {
    pub fn new(mode: TestMode) -> Self {
        Self { mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CiError::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(s) = self.s {
            if !(s > 0.0) || !s.is_finite() {
                return Err(CiError::InvalidConfig(format!("s must be positive, got {s}")));
            }
        }
        if self.mode == TestMode::Continuous && self.s.is_none() {
            return Err(CiError::InvalidConfig("continuous mode requires s".into()));
        }
        match self.calibration {
            Calibration::FixedThreshold => match self.zeta {
                Some(z) if z > 0.0 => {}
                _ => {
                    return Err(CiError::InvalidConfig(
                        "fixed-threshold calibration requires a positive zeta".into(),
                    ))
                }
            },
            Calibration::Permutation { permutations, .. } if permutations == 0 => {
                return Err(CiError::InvalidConfig("permutation count must be at least 1".into()))
            }
            Calibration::Permutation { .. } => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Accept,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinTerm {
    pub sigma: usize,
    pub omega: f64,
    /// `None` when the bin has fewer than four observations.
    pub u: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub per_bin: Vec<BinTerm>,
    pub n_input: usize,
    pub n_effective: usize,
    pub plan: Option<BinPlan>,
    pub d: Option<usize>,
    pub d_prime: Option<usize>,
    pub decision: Decision,
    pub p_value: Option<f64>,
    pub threshold_used: Option<f64>,
    pub poisson_overflow: bool,
    /// Null classes the guarantee covers in continuous mode.
    pub null_class: Option<String>,
    pub seed: u64,
    pub config: TestConfig,
}

/// `N ~ Poisson(n/2)` and whether `N > n`.
pub fn poissonize(n: usize, rng: &mut dyn RngCore) -> (usize, bool) {
    if n == 0 {
        return (0, false);
    }
    let draw: f64 = Poisson::new(n as f64 / 2.0).expect("positive rate").sample(rng);
    let big_n = draw as usize;
    (big_n, big_n > n)
}

/// Whether a bin's U-statistic carries the `ω_m` flattening weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    Unweighted,
    Weighted,
}

/// `T` and its per-bin terms; bins with `σ_m < 4` contribute nothing.
pub fn statistic(binned: &BinnedDataset, kind: StatisticKind) -> (f64, Vec<BinTerm>) {
    let mut total = 0.0;
    let mut terms = Vec::with_capacity(binned.bins.len());
    for bin in &binned.bins {
        let sigma = bin.len();
        let omega = match kind {
            StatisticKind::Unweighted => 1.0,
            StatisticKind::Weighted => omega_weight(sigma, bin.ell1, bin.ell2),
        };
        let u = (sigma >= 4).then(|| match kind {
            StatisticKind::Unweighted => u_from_slices(&bin.xs, &bin.ys, bin.ell1, bin.ell2, None),
            StatisticKind::Weighted => weighted_u_of_slices(&bin.xs, &bin.ys, bin.ell1, bin.ell2),
        });
        if let Some(u) = u {
            total += sigma as f64 * omega * u;
        }
        terms.push(BinTerm { sigma, omega, u });
    }
    (total, terms)
}

/// `T = Σ 1(σ_m ≥ 4) σ_m U_m`.
pub fn statistic_fixed_discrete(binned: &BinnedDataset) -> (f64, Vec<BinTerm>) {
    statistic(binned, StatisticKind::Unweighted)
}

/// `T = Σ 1(σ_m ≥ 4) σ_m ω_m U_{W,m}` on split bins.
pub fn statistic_scaling_discrete(binned: &BinnedDataset) -> (f64, Vec<BinTerm>) {
    statistic(binned, StatisticKind::Weighted)
}

fn statistic_value(binned: &BinnedDataset, kind: StatisticKind) -> f64 {
    let mut total = 0.0;
    for bin in binned.bins.iter().filter(|b| b.len() >= 4) {
        let sigma = bin.len() as f64;
        total += match kind {
            StatisticKind::Unweighted => sigma * u_from_slices(&bin.xs, &bin.ys, bin.ell1, bin.ell2, None),
            StatisticKind::Weighted => {
                sigma
                    * omega_weight(bin.len(), bin.ell1, bin.ell2)
                    * weighted_u_of_slices(&bin.xs, &bin.ys, bin.ell1, bin.ell2)
            }
        };
    }
    total
}

struct Prepared {
    binned: BinnedDataset,
    kind: StatisticKind,
    threshold: Option<f64>,
    null_class: Option<String>,
}

fn require_categorical(data: &TripleDataset, mode: TestMode) -> Result<()> {
    if !data.x.is_categorical() || !data.y.is_categorical() {
        return Err(CiError::ModeMismatch(format!("{mode} mode needs categorical x and y")));
    }
    Ok(())
}

fn require_unit_z(data: &TripleDataset, mode: TestMode) -> Result<()> {
    if data.z_dim != 1 && mode != TestMode::Multivariate {
        return Err(CiError::ModeMismatch(format!("{mode} mode needs one-dimensional z")));
    }
    Ok(())
}

fn require_unit_xy(data: &TripleDataset) -> Result<()> {
    for col in [&data.x, &data.y] {
        if let Column::Continuous(v) = col {
            if let Some(bad) = v.iter().find(|x| !(**x >= 0.0 && **x <= 1.0)) {
                return Err(CiError::OutOfSupport { value: *bad, lo: 0.0, hi: 1.0 });
            }
        }
    }
    Ok(())
}

/// Validates `data` against `config.mode` without running the test.
pub fn check_compatibility(data: &TripleDataset, config: &TestConfig) -> Result<()> {
    config.validate()?;
    let mode = config.mode;
    require_unit_z(data, mode)?;
    match mode {
        TestMode::FixedDiscrete | TestMode::ScalingDiscrete | TestMode::Unbounded => {
            require_categorical(data, mode)
        }
        TestMode::Continuous => {
            if data.x.is_categorical() || data.y.is_categorical() {
                return Err(CiError::ModeMismatch("continuous mode needs real-valued x and y".into()));
            }
            require_unit_xy(data)
        }
        TestMode::Multivariate => {
            if data.x.is_categorical() != data.y.is_categorical() {
                return Err(CiError::ModeMismatch("x and y must both be categorical or both real".into()));
            }
            if !data.x.is_categorical() {
                match config.s {
                    Some(s) if s >= 1.0 => {}
                    _ => {
                        return Err(CiError::InvalidConfig(
                            "multivariate mode with real x, y requires s ≥ 1".into(),
                        ))
                    }
                }
                require_unit_xy(data)?;
            }
            Ok(())
        }
    }
}

fn prepare(data: &TripleDataset, n: usize, config: &TestConfig) -> Result<Prepared> {
    let zeta = config.zeta;
    match config.mode {
        TestMode::FixedDiscrete => Ok(Prepared {
            binned: bin_dataset(data, &binning::fixed_discrete_plan(n))?,
            kind: StatisticKind::Unweighted,
            threshold: zeta.map(|z| z * (n as f64).powf(0.2)),
            null_class: None,
        }),
        TestMode::ScalingDiscrete => {
            let (_, l1, _, l2) = categorical_parts(data)?;
            let plan = binning::scaling_discrete_plan(n, l1, l2);
            let d = plan.d as f64;
            Ok(Prepared {
                binned: bin_dataset(data, &plan)?,
                kind: StatisticKind::Weighted,
                threshold: zeta.map(|z| (z * d).sqrt()),
                null_class: None,
            })
        }
        TestMode::Continuous => {
            let s = config.s.expect("validated");
            let plan = binning::continuous_plan(n, s)?;
            let discrete = discretize_dataset(data, plan.d_prime.expect("continuous plan sets d'"))?;
            let d = plan.d as f64;
            Ok(Prepared {
                binned: bin_dataset(&discrete, &plan)?,
                kind: StatisticKind::Weighted,
                threshold: zeta.map(|z| (z * d).sqrt()),
                null_class: Some(if s >= 1.0 { "tv_or_chi2_lipschitz" } else { "chi2_lipschitz" }.into()),
            })
        }
        TestMode::Multivariate => {
            let categorical = data.x.is_categorical();
            let plan = binning::multivariate_plan(n, data.z_dim, if categorical { None } else { config.s })?;
            let threshold = zeta.map(|z| z * plan.threshold_scale());
            if categorical {
                Ok(Prepared {
                    binned: bin_dataset(data, &plan)?,
                    kind: StatisticKind::Unweighted,
                    threshold,
                    null_class: None,
                })
            } else {
                let discrete = discretize_dataset(data, plan.d_prime.expect("continuous plan sets d'"))?;
                Ok(Prepared {
                    binned: bin_dataset(&discrete, &plan)?,
                    kind: StatisticKind::Weighted,
                    threshold,
                    null_class: Some("tv_or_chi2_lipschitz".into()),
                })
            }
        }
        TestMode::Unbounded => unreachable!("unbounded mode is prepared by run_unbounded"),
    }
}

/// Runs one test; all randomness comes from `config.seed`.
pub fn run_test(data: &TripleDataset, config: &TestConfig) -> Result<TestReport> {
    let mut r = rng::seeded(config.seed);
    test_with_rng(data, config, &mut r)
}

/// Runs one test drawing Poissonization and permutation seeds from `rng`.
pub fn test_with_rng(data: &TripleDataset, config: &TestConfig, rng: &mut dyn RngCore) -> Result<TestReport> {
    check_compatibility(data, config)?;
    let n_input = data.len();
    let (test_part, estimation_part) = if config.mode == TestMode::Unbounded {
        let half = n_input / 2;
        let idx_test: Vec<usize> = (0..half).collect();
        let idx_est: Vec<usize> = (half..n_input).collect();
        (data.select(&idx_test), Some(data.select(&idx_est)))
    } else {
        (data.clone(), None)
    };
    let n = test_part.len();
    let (n_eff, overflow) = if config.poissonize { poissonize(n, rng) } else { (n, false) };
    let mut report = TestReport {
        statistic: 0.0,
        per_bin: Vec::new(),
        n_input,
        n_effective: n_eff,
        plan: None,
        d: None,
        d_prime: None,
        decision: Decision::Accept,
        p_value: None,
        threshold_used: None,
        poisson_overflow: overflow,
        null_class: None,
        seed: config.seed,
        config: config.clone(),
    };
    if overflow {
        return Ok(report);
    }
    let used = test_part.head(n_eff);
    let prepared = match estimation_part {
        Some(est) => {
            let support = binning::estimate_support(&est.z, config.eta.unwrap_or(0.05), config.c_const.unwrap_or(1.0))?;
            let plan = binning::unbounded_plan(n, &support);
            let d = plan.d as f64;
            Prepared {
                binned: bin_dataset_clipped(&used, &plan)?,
                kind: StatisticKind::Unweighted,
                threshold: config.zeta.map(|z| z * d.sqrt()),
                null_class: None,
            }
        }
        None => prepare(&used, n, config)?,
    };
    let (t, per_bin) = statistic(&prepared.binned, prepared.kind);
    report.statistic = t;
    report.per_bin = per_bin;
    report.d = Some(prepared.binned.plan.d);
    report.d_prime = prepared.binned.plan.d_prime;
    report.null_class = prepared.null_class;
    match config.calibration {
        Calibration::FixedThreshold => {
            let tau = prepared.threshold.expect("validated zeta");
            report.threshold_used = Some(tau);
            report.decision = if t >= tau { Decision::Reject } else { Decision::Accept };
        }
        Calibration::Permutation { permutations, conservative } => {
            let base: u64 = rng.random();
            let kind = prepared.kind;
            let res = permutation_pvalue(
                &prepared.binned,
                |b| statistic_value(b, kind),
                permutations,
                conservative,
                base,
            );
            report.p_value = Some(res.p_value);
            report.decision = if res.p_value <= config.alpha {
                Decision::Reject
            } else {
                Decision::Accept
            };
        }
    }
    report.plan = Some(prepared.binned.plan);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ustat::DiscretePairSample;
    use proptest::prelude::*;

    fn binned(bins: Vec<DiscretePairSample>) -> BinnedDataset {
        let d = bins.len();
        BinnedDataset {
            sigma: bins.iter().map(|b| b.len()).collect(),
            bins,
            plan: BinPlan {
                d,
                d_z: 1,
                d_prime: None,
                support: vec![(0.0, 1.0)],
                rate_condition: None,
            },
        }
    }

    fn bin(xs: Vec<u32>, ys: Vec<u32>, l1: usize, l2: usize) -> DiscretePairSample {
        DiscretePairSample { xs, ys, ell1: l1, ell2: l2 }
    }

    #[test]
    fn small_bins_contribute_nothing() {
        let b = binned(vec![bin(vec![0, 1, 0], vec![0, 1, 0], 2, 2), bin(vec![1], vec![1], 2, 2)]);
        assert_eq!(statistic_fixed_discrete(&b).0, 0.0);
        assert_eq!(statistic_scaling_discrete(&b).0, 0.0);
        let b = binned(vec![bin(vec![1; 10], vec![0; 10], 2, 2)]);
        assert_eq!(statistic_fixed_discrete(&b).0, 0.0);
    }

    #[test]
    fn single_category_gives_zero() {
        let b = binned(vec![bin(vec![0; 13], vec![0; 13], 1, 1); 3]);
        assert_eq!(statistic_scaling_discrete(&b).0, 0.0);
    }

    #[test]
    fn four_sample_bins_scale_by_omega() {
        let bins = vec![
            bin(vec![0, 0, 1, 1], vec![0, 0, 1, 1], 2, 3),
            bin(vec![0, 1, 1, 0], vec![2, 1, 1, 0], 2, 3),
            bin(vec![1, 1, 1, 0], vec![0, 2, 1, 0], 2, 3),
        ];
        let b = binned(bins);
        let (fixed, terms) = statistic_fixed_discrete(&b);
        let (scaled, _) = statistic_scaling_discrete(&b);
        let omega = (2.0f64 * 3.0).sqrt();
        let expected: f64 = terms.iter().map(|t| 4.0 * omega * t.u.unwrap()).sum();
        assert!((scaled - expected).abs() < 1e-12);
        assert!((scaled - omega * fixed).abs() < 1e-12);
    }

    #[test]
    fn poissonize_is_seeded() {
        let a = poissonize(1000, &mut rng::seeded(5));
        let b = poissonize(1000, &mut rng::seeded(5));
        assert_eq!(a, b);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("scaling-discrete".parse::<TestMode>().unwrap(), TestMode::ScalingDiscrete);
        assert_eq!("continuous".parse::<TestMode>().unwrap(), TestMode::Continuous);
        assert!("bogus".parse::<TestMode>().is_err());
    }

    fn dataset(xs: Vec<u32>, ys: Vec<u32>, z: Vec<f64>) -> TripleDataset {
        TripleDataset::new(
            Column::Categorical { values: xs, levels: 3 },
            Column::Categorical { values: ys, levels: 2 },
            z,
            1,
        )
        .unwrap()
    }

    #[test]
    fn mode_mismatch_is_reported() {
        let d = dataset(vec![0; 10], vec![0; 10], vec![0.5; 10]);
        let cfg = TestConfig { s: Some(1.0), ..TestConfig::new(TestMode::Continuous) };
        assert!(matches!(run_test(&d, &cfg), Err(CiError::ModeMismatch(_))));
        let cfg = TestConfig::new(TestMode::Continuous);
        assert!(matches!(run_test(&d, &cfg), Err(CiError::InvalidConfig(_))));
        let cfg = TestConfig { calibration: Calibration::FixedThreshold, ..TestConfig::default() };
        assert!(run_test(&d, &cfg).is_err());
    }

    #[test]
    fn poissonization_can_be_switched_off() {
        let n = 200;
        let d = dataset((0..n).map(|i| (i % 3) as u32).collect(), (0..n).map(|i| (i % 2) as u32).collect(), (0..n).map(|i| i as f64 / n as f64).collect());
        let on = run_test(&d, &TestConfig::default()).unwrap();
        assert!(on.n_effective < n);
        let off = run_test(&d, &TestConfig { poissonize: false, ..TestConfig::default() }).unwrap();
        assert_eq!(off.n_effective, n);
        let legacy: TestConfig = serde_json::from_str(
            r#"{"mode":"fixed_discrete","s":null,"zeta":null,"calibration":{"kind":"fixed_threshold"},"alpha":0.05,"seed":0,"eta":null,"c_const":null}"#,
        )
        .unwrap();
        assert!(legacy.poissonize);
    }

    fn random_data() -> impl Strategy<Value = TripleDataset> {
        (20usize..300).prop_flat_map(|n| {
            (
                prop::collection::vec(0u32..3, n),
                prop::collection::vec(0u32..2, n),
                prop::collection::vec(0.0f64..=1.0, n),
            )
                .prop_map(|(x, y, z)| dataset(x, y, z))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn reports_are_deterministic(d in random_data(), seed in any::<u64>(), scaling in any::<bool>()) {
            let mode = if scaling { TestMode::ScalingDiscrete } else { TestMode::FixedDiscrete };
            let cfg = TestConfig { seed, calibration: Calibration::Permutation { permutations: 20, conservative: false }, ..TestConfig::new(mode) };
            let a = run_test(&d, &cfg).unwrap();
            let b = run_test(&d, &cfg).unwrap();
            prop_assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn relabeling_leaves_statistic_unchanged(d in random_data(), seed in any::<u64>()) {
            for mode in [TestMode::FixedDiscrete, TestMode::ScalingDiscrete] {
                let cfg = TestConfig { seed, calibration: Calibration::FixedThreshold, zeta: Some(1.0), ..TestConfig::new(mode) };
                let (xs, ys) = match (&d.x, &d.y) {
                    (Column::Categorical { values: x, .. }, Column::Categorical { values: y, .. }) => (x.clone(), y.clone()),
                    _ => unreachable!(),
                };
                let swapped = dataset(xs.iter().map(|x| (x + 1) % 3).collect(), ys.iter().map(|y| 1 - y).collect(), d.z.clone());
                let a = run_test(&d, &cfg).unwrap();
                let b = run_test(&swapped, &cfg).unwrap();
                prop_assert!((a.statistic - b.statistic).abs() <= 1e-12 * a.statistic.abs().max(1.0));
            }
        }

        #[test]
        fn gate_ignores_small_bins(bins in prop::collection::vec(
            (0usize..12).prop_flat_map(|n| (prop::collection::vec(0u32..3, n), prop::collection::vec(0u32..2, n))),
            1..10,
        )) {
            let all = binned(bins.iter().map(|(x, y)| bin(x.clone(), y.clone(), 3, 2)).collect());
            let big = binned(bins.iter().filter(|(x, _)| x.len() >= 4).map(|(x, y)| bin(x.clone(), y.clone(), 3, 2)).collect());
            for kind in [StatisticKind::Unweighted, StatisticKind::Weighted] {
                prop_assert_eq!(statistic(&all, kind).0, statistic(&big, kind).0);
                prop_assert_eq!(statistic(&all, kind).0, statistic_value(&all, kind));
            }
        }

        #[test]
        fn overflow_implies_accept(d in random_data(), seed in any::<u64>()) {
            let r = run_test(&d, &TestConfig { seed, ..TestConfig::default() }).unwrap();
            if r.poisson_overflow {
                prop_assert_eq!(r.decision, Decision::Accept);
            }
            if let Some(p) = r.p_value {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
