//! Reproducible experiment drivers, their configuration and result files.
//!
//! Every random draw is addressed by the root seed plus the parameters of the
//! cell it belongs to, so a cell gives the same numbers alone or inside a
//! sweep, and a rerun with the same config reproduces every file byte for
//! byte.

pub mod config;
pub mod drivers;
pub mod output;

pub use config::{parse_config, parse_config_str, ExperimentConfig, ExperimentKind};
pub use drivers::run;
pub use output::{read_manifest, verify_manifest, RunManifest};
