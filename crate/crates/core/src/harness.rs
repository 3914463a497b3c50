//! Replicated size/power experiments and the CSV dataset format.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::citests::{test_with_rng, Calibration, Decision, TestConfig, TestMode};
use crate::data::{Column, TripleDataset};
use crate::distributions::{ConditionalDiscreteModel, ContinuousConditionalModel};
use crate::error::{CiError, Result};
use crate::generators::{
    default_bump, discrete_alt, discrete_null, AdversarialContinuousSpec, AdversarialDiscreteSpec, ContinuousAlt,
    ContinuousNull,
};
use crate::rng;

/// A data source for experiments and the `generate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    DiscreteNull,
    DiscreteAlt,
    ContinuousNull,
    ContinuousAlt,
    /// Fresh random signs per dataset.
    AdversarialDiscrete { ell1: usize, ell2: usize, rho: f64, d: usize },
    /// Adversarial discrete law whose CI distance is `c n^{-2/5}`; see [`adversarial_rate_params`].
    AdversarialRate { ell1: usize, ell2: usize, c: f64 },
    AdversarialContinuous { rho: f64, d: usize, d_prime: usize, s: f64 },
}

/// Number of bumps and amplitude for [`GeneratorSpec::AdversarialRate`] at
/// sample size `n`: `d = max(1, round(n^{0.4}/4))` and `ρ` solving
/// `ℓ₁ℓ₂ρ√d·c_h = c n^{-0.4}`.
pub fn adversarial_rate_params(n: usize, ell1: usize, ell2: usize, c: f64) -> (f64, usize) {
    let n = n.max(1) as f64;
    let d = ((n.powf(0.4) / 4.0).round() as usize).max(1);
    let rho = c * n.powf(-0.4) / ((ell1 * ell2) as f64 * (d as f64).sqrt() * default_bump().c);
    (rho, d)
}

impl GeneratorSpec {
    pub fn id(&self) -> &'static str {
        match self {
            Self::DiscreteNull => "discrete-null",
            Self::DiscreteAlt => "discrete-alt",
            Self::ContinuousNull => "continuous-null",
            Self::ContinuousAlt => "continuous-alt",
            Self::AdversarialDiscrete { .. } => "adversarial-discrete",
            Self::AdversarialRate { .. } => "adversarial-rate",
            Self::AdversarialContinuous { .. } => "adversarial-continuous",
        }
    }

    /// Whether X and Y come out categorical.
    pub fn is_discrete(&self) -> bool {
        !matches!(self, Self::ContinuousNull | Self::ContinuousAlt | Self::AdversarialContinuous { .. })
    }

    pub fn generate(&self, n: usize, rng: &mut dyn RngCore) -> Result<TripleDataset> {
        Ok(match self {
            Self::DiscreteNull => discrete_null().sample(n, rng),
            Self::DiscreteAlt => discrete_alt().sample(n, rng),
            Self::ContinuousNull => ContinuousNull.sample(n, rng),
            Self::ContinuousAlt => ContinuousAlt.sample(n, rng),
            Self::AdversarialDiscrete { ell1, ell2, rho, d } => {
                AdversarialDiscreteSpec::random(*ell1, *ell2, *rho, *d, rng)?.sample(n, rng)
            }
            Self::AdversarialRate { ell1, ell2, c } => {
                let (rho, d) = adversarial_rate_params(n, *ell1, *ell2, *c);
                AdversarialDiscreteSpec::random(*ell1, *ell2, rho, d, rng)?.sample(n, rng)
            }
            Self::AdversarialContinuous { rho, d, d_prime, s } => {
                AdversarialContinuousSpec::random(*rho, *d, *d_prime, *s, rng)?.sample(n, rng)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub generator: GeneratorSpec,
    pub sizes: Vec<usize>,
    pub replications: usize,
    /// Mode, calibration (including the permutation count) and `α`.
    pub config: TestConfig,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.replications == 0 {
            return Err(CiError::InvalidConfig("replications must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(CiError::InvalidConfig("sample sizes must be a nonempty list of positive integers".into()));
        }
        let needs_discrete = matches!(
            self.config.mode,
            TestMode::FixedDiscrete | TestMode::ScalingDiscrete | TestMode::Unbounded
        );
        let needs_continuous = self.config.mode == TestMode::Continuous;
        if (needs_discrete && !self.generator.is_discrete()) || (needs_continuous && self.generator.is_discrete()) {
            return Err(CiError::ModeMismatch(format!(
                "generator {} cannot feed {} mode",
                self.generator.id(),
                self.config.mode
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePowerRow {
    pub n: usize,
    pub rejection_rate: f64,
    /// `√(r(1−r)/R)`.
    pub se: f64,
    #[serde(rename = "mean_T")]
    pub mean_t: f64,
    #[serde(rename = "mean_N")]
    pub mean_n: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SizePowerTable {
    pub rows: Vec<SizePowerRow>,
}

pub const TABLE_HEADER: &str = "n,rejection_rate,se,mean_T,mean_N";

impl SizePowerTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TABLE_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{},{:?},{:?},{:?},{:?}", r.n, r.rejection_rate, r.se, r.mean_t, r.mean_n)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn row(&self, n: usize) -> Option<&SizePowerRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

struct Outcome {
    reject: bool,
    statistic: f64,
    n_effective: usize,
}

/// Runs every `(n, replication)` cell on its own stream `stream(seed, [n_idx, rep])`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SizePowerTable> {
    spec.validate()?;
    let reps = spec.replications;
    let cells: Vec<(usize, usize)> = (0..spec.sizes.len()).flat_map(|i| (0..reps).map(move |r| (i, r))).collect();
    let outcomes: Vec<Outcome> = cells
        .par_iter()
        .map(|&(i, r)| {
            let mut g = rng::stream(spec.seed, &[i as u64, r as u64]);
            let data = spec.generator.generate(spec.sizes[i], &mut g)?;
            let rep = test_with_rng(&data, &spec.config, &mut g)?;
            Ok(Outcome {
                reject: rep.decision == Decision::Reject,
                statistic: rep.statistic,
                n_effective: rep.n_effective,
            })
        })
        .collect::<Result<_>>()?;
    let rows = spec
        .sizes
        .iter()
        .zip(outcomes.chunks(reps))
        .map(|(&n, chunk)| {
            let r = reps as f64;
            let rate = chunk.iter().filter(|o| o.reject).count() as f64 / r;
            SizePowerRow {
                n,
                rejection_rate: rate,
                se: (rate * (1.0 - rate) / r).sqrt(),
                mean_t: chunk.iter().map(|o| o.statistic).sum::<f64>() / r,
                mean_n: chunk.iter().map(|o| o.n_effective as f64).sum::<f64>() / r,
            }
        })
        .collect();
    Ok(SizePowerTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Discrete families, scaling-discrete test.
    Fig3,
    /// Continuous families, continuous test with `s = 1`.
    Fig4,
}

impl FromStr for Preset {
    type Err = CiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fig3" => Ok(Self::Fig3),
            "fig4" => Ok(Self::Fig4),
            other => Err(CiError::InvalidConfig(format!("unknown preset '{other}' (expected fig3 or fig4)"))),
        }
    }
}

/// `n = 100, 200, …, 1000` with 100 replications and 100 permutations at `α = 0.05`.
pub fn preset_experiments(preset: Preset, seed: u64) -> Vec<ExperimentSpec> {
    let sizes: Vec<usize> = (1..=10).map(|k| 100 * k).collect();
    let (mode, s, gens) = match preset {
        Preset::Fig3 => (TestMode::ScalingDiscrete, None, [GeneratorSpec::DiscreteNull, GeneratorSpec::DiscreteAlt]),
        Preset::Fig4 => (TestMode::Continuous, Some(1.0), [GeneratorSpec::ContinuousNull, GeneratorSpec::ContinuousAlt]),
    };
    gens.into_iter()
        .enumerate()
        .map(|(k, generator)| ExperimentSpec {
            generator,
            sizes: sizes.clone(),
            replications: 100,
            config: TestConfig {
                mode,
                s,
                calibration: Calibration::Permutation { permutations: 100, conservative: false },
                alpha: 0.05,
                seed,
                poissonize: false,
                ..TestConfig::default()
            },
            seed: rng::stream(seed, &[k as u64]).next_u64(),
        })
        .collect()
}

/// Caps rayon's global pool; call once before any parallel work.
pub fn init_thread_pool(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| CiError::InvalidConfig(format!("thread pool: {e}")))?;
    }
    Ok(())
}

enum Parsed {
    Cat(Vec<u32>),
    Real(Vec<f64>),
}

fn is_integer_token(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// Reads the `x,y,z` / `x,y,z1,z2` format. A column whose every entry is a
/// positive integer literal is categorical with levels `1..=max`.
pub fn read_dataset<R: Read>(reader: R) -> Result<TripleDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let z_dim = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x", "y", "z"] => 1,
        ["x", "y", "z1", "z2"] => 2,
        _ => {
            return Err(CiError::Parse {
                row: 1,
                column: 1,
                message: format!("header must be x,y,z or x,y,z1,z2, got {}", header.join(",")),
            })
        }
    };
    let width = 2 + z_dim;
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); 2];
    let mut z = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| CiError::Parse { row, column: 1, message: e.to_string() })?;
        if rec.len() != width {
            return Err(CiError::Parse {
                row,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, got {}", rec.len()),
            });
        }
        for c in 0..2 {
            cells[c].push(rec[c].to_string());
        }
        for c in 2..width {
            let v: f64 = rec[c].parse().map_err(|_| CiError::Parse {
                row,
                column: c + 1,
                message: format!("'{}' is not a number", &rec[c]),
            })?;
            if !v.is_finite() {
                return Err(CiError::Parse { row, column: c + 1, message: "value is not finite".into() });
            }
            z.push(v);
        }
    }
    if z.is_empty() {
        return Err(CiError::EmptyInput);
    }
    let mut cols = Vec::with_capacity(2);
    for (c, tokens) in cells.iter().enumerate() {
        let parsed = if tokens.iter().all(|t| is_integer_token(t)) {
            let mut v = Vec::with_capacity(tokens.len());
            for (k, t) in tokens.iter().enumerate() {
                match t.parse::<u32>() {
                    Ok(x) if x >= 1 => v.push(x - 1),
                    _ => {
                        return Err(CiError::Parse {
                            row: k + 2,
                            column: c + 1,
                            message: format!("category '{t}' must be an integer ≥ 1"),
                        })
                    }
                }
            }
            Parsed::Cat(v)
        } else {
            let mut v = Vec::with_capacity(tokens.len());
            for (k, t) in tokens.iter().enumerate() {
                match t.parse::<f64>() {
                    Ok(x) if x.is_finite() => v.push(x),
                    _ => {
                        return Err(CiError::Parse {
                            row: k + 2,
                            column: c + 1,
                            message: format!("'{t}' is not a number"),
                        })
                    }
                }
            }
            Parsed::Real(v)
        };
        cols.push(match parsed {
            Parsed::Cat(v) => {
                let levels = v.iter().max().map_or(1, |m| m + 1);
                Column::Categorical { values: v, levels }
            }
            Parsed::Real(v) => Column::Continuous(v),
        });
    }
    let y = cols.pop().expect("two columns");
    let x = cols.pop().expect("two columns");
    TripleDataset::new(x, y, z, z_dim)
}

pub fn read_dataset_path(path: &Path) -> Result<TripleDataset> {
    read_dataset(std::fs::File::open(path)?)
}

fn cell(col: &Column, i: usize) -> String {
    match col {
        Column::Categorical { values, .. } => (values[i] + 1).to_string(),
        // Debug keeps a '.' or exponent, so reals never read back as categories.
        Column::Continuous(v) => format!("{:?}", v[i]),
    }
}

pub fn write_dataset<W: Write>(mut w: W, data: &TripleDataset) -> Result<()> {
    writeln!(w, "{}", if data.z_dim == 1 { "x,y,z" } else { "x,y,z1,z2" })?;
    for i in 0..data.len() {
        let z: Vec<String> = data.z_point(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{},{},{}", cell(&data.x, i), cell(&data.y, i), z.join(","))?;
    }
    Ok(())
}
