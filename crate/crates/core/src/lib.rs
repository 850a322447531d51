//! Simulation of a random string driven by the stochastic heat equation
//! among Poisson traps: exact spectral sampling, trap fields, sausage
//! volumes, survival estimators and diagnostic tools.

pub mod error;
pub mod experiment;
pub mod index;
pub mod lab;
pub mod rng;
pub mod sausage;
pub mod series;
pub mod spectral;
pub mod stats;
pub mod survival;
pub mod traps;

pub use error::{Error, Result};
pub use rng::{Purpose, SeedTree, StreamRng};
pub use spectral::{FieldSamples, ModelParams, PotentialKind, SpectralModel, StringState};
