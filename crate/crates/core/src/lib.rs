//! Binned U-statistic tests of conditional independence.

pub mod binning;
pub mod calibration;
pub mod citests;
pub mod data;
pub mod distributions;
pub mod error;
pub mod flatten;
pub mod generators;
pub mod harness;
pub mod rng;
pub mod smoothness;
pub mod ustat;

pub use binning::{BinPlan, BinnedDataset, SupportEstimate};
pub use citests::{run_test, Calibration, Decision, TestConfig, TestMode, TestReport};
pub use data::{Column, TripleDataset};
pub use distributions::{DiscreteJointTable, DiscreteMarginalPair};
pub use error::{CiError, Result};
pub use flatten::{FlatteningWeights, SplitPlan};
pub use ustat::DiscretePairSample;
pub use generators::{BumpFunction, CouplingSpec};
pub use harness::{ExperimentSpec, GeneratorSpec, SizePowerTable};
pub use smoothness::{SmoothnessClass, SmoothnessReport};
