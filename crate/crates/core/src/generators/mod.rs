//! Samplers and densities for the simulation families, the adversarial
//! perturbations and the CI coupling.

pub mod adversarial;
pub mod bump;
pub mod coupling;
pub mod simulation;

pub use adversarial::{make_tilde_delta, AdversarialContinuousSpec, AdversarialDiscreteSpec};
pub use bump::{default_bump, BumpFunction};
pub use coupling::{ci_coupling, CouplingSpec};
pub use simulation::{
    discrete_alt, discrete_null, gen_discrete_alt, gen_discrete_null, ContinuousAlt, ContinuousNull,
    ExpFamilyModel, SinusoidalExponents,
};
