//! Entanglement generation between two coupled quantum kicked rotators.

pub mod classical;
pub mod error;
pub mod experiments;
pub mod floquet;
pub mod observables;
pub mod rng;
pub mod spectral;
pub mod theory;
pub mod torus;

pub use error::{Error, Result};
