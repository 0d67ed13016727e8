//! Reduced states, purity and phase-space pictures of quantum and classical
//! states.

mod density;
mod distribution;
mod husimi;
mod wigner;

pub use density::{purity, reduce, state_purity, Particle, PurityMetadata, PuritySeries, ReducedDensity};
pub use distribution::{correspondence_distance, DistributionKind, PhaseSpaceDistribution};
pub use husimi::{husimi, MIN_RESOLUTION};
pub use wigner::{wigner, wigner_inverse};
