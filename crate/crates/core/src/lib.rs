//! Order selection for hidden Markov models.
//!
//! This crate holds the pure numerical machinery: emission distributions,
//! exact HMM algorithms (scaled forward likelihood, Viterbi decoding,
//! complete-data likelihood, one-step-ahead forecast distributions),
//! multi-start maximum likelihood over unconstrained working parameters,
//! AIC/BIC/ICL tables, forecast pseudo-residual diagnostics, the
//! misspecification scenario generators and movement-track geometry.
//!
//! It is `no_std` and only needs `alloc`. File formats, the parallel
//! experiment harness and the command line live in the `hmmorder` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bench;
pub mod diagnose;
pub mod dist;
mod error;
pub mod fit;
pub mod math;
pub mod model;
pub mod movement;
mod optim;
pub mod rng;
pub mod scenarios;
pub mod select;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use dist::Distribution;
pub use error::{DiagnoseError, DistError, FitError, ModelError, ScenarioError};
pub use fit::{FitConfig, FitResult, ModelFamily};
pub use model::{HmmSpec, InitialDistribution, ObservationSeries, StateSequence, TransitionMatrix};
pub use select::{CriteriaRow, CriteriaTable};
