//! Experiment harness: config files, named experiments, CSV output and
//! network snapshots on top of `noma-aoi-core`.

pub mod config;
mod error;
pub mod experiments;
pub mod output;
pub mod snapshot;

pub use error::{Error, Result};
pub use noma_aoi_core as core;
