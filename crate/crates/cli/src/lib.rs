//! Files, configuration and commands around [`sparse_evo_core`]: CSV datasets,
//! JSON model persistence, run configuration with presets, metrics logging,
//! and the `train` / `evaluate` / `analyze` / `gen-data` commands behind the
//! `sparse-evo` binary.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod metrics;
pub mod model_io;
pub mod parallel;

pub use error::{IoError, Result};
pub use sparse_evo_core as core;
