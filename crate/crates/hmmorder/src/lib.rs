//! File formats, TOML configuration, the parallel experiment harness, the
//! movement pipeline and the command line for `hmmorder-core`.

pub mod cli;
pub mod config;
mod error;
pub mod experiment;
pub mod files;
pub mod manifest;
pub mod parallel;
pub mod pipeline;
pub mod tracks;

pub use error::{Error, Result};
