//! Test flags and the optional TOML config file. Flags given on the command
//! line override keys in the file.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use citest_core::{Calibration, TestConfig, TestMode};

use crate::{CliResult, Failure};

#[derive(Args, Debug, Default, Clone)]
pub struct TestFlags {
    /// TOML file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// fixed_discrete, scaling_discrete, continuous, multivariate or unbounded.
    #[arg(long)]
    pub mode: Option<String>,
    /// Smoothness exponent for continuous, multivariate and unbounded modes.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub perms: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Threshold multiplier for the fixed-threshold calibration.
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tail mass left outside the estimated support (unbounded mode).
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long = "c-const")]
    pub c_const: Option<f64>,
    /// Use the (1 + #exceedances)/(1 + M) p-value.
    #[arg(long)]
    pub conservative: bool,
    /// Compare against zeta times the null standard deviation instead of permuting.
    #[arg(long = "fixed-threshold")]
    pub fixed_threshold: bool,
    /// Use all n rows rather than a Poisson(n/2) prefix.
    #[arg(long = "no-poissonize")]
    pub no_poissonize: bool,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub mode: Option<String>,
    pub s: Option<f64>,
    pub perms: Option<usize>,
    pub alpha: Option<f64>,
    pub zeta: Option<f64>,
    pub seed: Option<u64>,
    pub eta: Option<f64>,
    pub c_const: Option<f64>,
    pub conservative: Option<bool>,
    pub fixed_threshold: Option<bool>,
    pub poissonize: Option<bool>,
    pub out: Option<PathBuf>,
    pub preset: Option<String>,
    pub sizes: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub family: Option<String>,
    pub ell1: Option<usize>,
    pub ell2: Option<usize>,
    pub rho: Option<f64>,
    pub d: Option<usize>,
    pub d_prime: Option<usize>,
    pub gen_s: Option<f64>,
    pub c: Option<f64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| Failure::Usage(format!("config: {e}")))
    }
}

impl TestFlags {
    pub fn file_config(&self) -> CliResult<FileConfig> {
        match &self.config {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::Usage(format!("config {}: {e}", p.display())))?;
                FileConfig::parse(&text)
            }
        }
    }

    pub fn to_config(&self, file: &FileConfig) -> CliResult<TestConfig> {
        let base = TestConfig::default();
        let mode = match self.mode.as_deref().or(file.mode.as_deref()) {
            Some(m) => m.parse::<TestMode>()?,
            None => base.mode,
        };
        let default_perms = match base.calibration {
            Calibration::Permutation { permutations, .. } => permutations,
            Calibration::FixedThreshold => 100,
        };
        let fixed = self.fixed_threshold || file.fixed_threshold.unwrap_or(false);
        let calibration = if fixed {
            Calibration::FixedThreshold
        } else {
            Calibration::Permutation {
                permutations: self.perms.or(file.perms).unwrap_or(default_perms),
                conservative: self.conservative || file.conservative.unwrap_or(false),
            }
        };
        let poissonize = if self.no_poissonize { false } else { file.poissonize.unwrap_or(base.poissonize) };
        Ok(TestConfig {
            mode,
            s: self.s.or(file.s).or(base.s),
            zeta: self.zeta.or(file.zeta).or(base.zeta),
            calibration,
            alpha: self.alpha.or(file.alpha).unwrap_or(base.alpha),
            seed: self.seed.or(file.seed).unwrap_or(base.seed),
            eta: self.eta.or(file.eta).or(base.eta),
            c_const: self.c_const.or(file.c_const).or(base.c_const),
            poissonize,
        })
    }
}
