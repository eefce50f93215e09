use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Rejected distribution parameters or arguments.
#[derive(Debug, Clone, PartialEq)]
pub enum DistError {
    InvalidParameter { name: &'static str, value: f64 },
    ProbabilityOutOfRange(f64),
    Unsupported(&'static str),
    Table(String),
}

impl fmt::Display for DistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistError::InvalidParameter { name, value } => {
                write!(f, "invalid distribution parameter {name} = {value}")
            }
            DistError::ProbabilityOutOfRange(p) => write!(f, "probability {p} outside (0, 1)"),
            DistError::Unsupported(what) => write!(f, "unsupported operation: {what}"),
            DistError::Table(msg) => write!(f, "spline table: {msg}"),
        }
    }
}

impl core::error::Error for DistError {}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    InvalidTpm(String),
    Reducible,
    InvalidInitial(String),
    ChannelMismatch { expected: usize, found: usize },
    StateCountMismatch { channel: usize, expected: usize, found: usize },
    TrackTooShort { track: usize, len: usize },
    AllMissing { track: usize },
    MissingObservation { track: usize, slot: usize, channel: usize },
    IndexOutOfRange(&'static str),
    StatesMismatch(String),
    NonFinite,
    Dist(DistError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::InvalidTpm(msg) => write!(f, "invalid transition probability matrix: {msg}"),
            ModelError::Reducible => write!(f, "transition matrix is reducible; no unique stationary distribution"),
            ModelError::InvalidInitial(msg) => write!(f, "invalid initial distribution: {msg}"),
            ModelError::ChannelMismatch { expected, found } => {
                write!(f, "channel count mismatch: model has {expected}, data has {found}")
            }
            ModelError::StateCountMismatch { channel, expected, found } => write!(
                f,
                "channel {channel} has {found} emission distributions, expected {expected}"
            ),
            ModelError::TrackTooShort { track, len } => {
                write!(f, "track {track} has {len} slots; at least 2 are required")
            }
            ModelError::AllMissing { track } => write!(f, "track {track} has no observed values"),
            ModelError::MissingObservation { track, slot, channel } => write!(
                f,
                "observation missing at track {track}, slot {slot}, channel {channel}"
            ),
            ModelError::IndexOutOfRange(what) => write!(f, "{what} index out of range"),
            ModelError::StatesMismatch(msg) => write!(f, "state sequence does not match data: {msg}"),
            ModelError::NonFinite => write!(f, "non-finite emission parameters"),
            ModelError::Dist(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ModelError {}

impl From<DistError> for ModelError {
    fn from(e: DistError) -> Self {
        ModelError::Dist(e)
    }
}

/// Outcome of a single optimizer start, kept for diagnostics when a fit fails.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StartRecord {
    pub index: usize,
    pub seed: u64,
    pub converged: bool,
    pub log_lik: Option<f64>,
    pub at_bound: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitError {
    InvalidConfig(String),
    NotEstimable(&'static str),
    WorkingLength { expected: usize, found: usize },
    OutOfBounds(String),
    NoConvergedStart(Vec<StartRecord>),
    Model(ModelError),
}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitError::InvalidConfig(msg) => write!(f, "invalid fit configuration: {msg}"),
            FitError::NotEstimable(family) => {
                write!(f, "{family} emissions have no working parameterization")
            }
            FitError::WorkingLength { expected, found } => {
                write!(f, "working vector has length {found}, template needs {expected}")
            }
            FitError::OutOfBounds(msg) => write!(f, "natural parameter out of bounds: {msg}"),
            FitError::NoConvergedStart(starts) => {
                let finite = starts.iter().filter(|s| s.log_lik.is_some()).count();
                write!(
                    f,
                    "no start converged ({} starts, {} with finite likelihood)",
                    starts.len(),
                    finite
                )
            }
            FitError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for FitError {}

impl From<ModelError> for FitError {
    fn from(e: ModelError) -> Self {
        FitError::Model(e)
    }
}

impl From<DistError> for FitError {
    fn from(e: DistError) -> Self {
        FitError::Model(ModelError::Dist(e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    InvalidKnob(String),
    Model(ModelError),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::InvalidKnob(msg) => write!(f, "invalid scenario setting: {msg}"),
            ScenarioError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ScenarioError {}

impl From<ModelError> for ScenarioError {
    fn from(e: ModelError) -> Self {
        ScenarioError::Model(e)
    }
}

impl From<DistError> for ScenarioError {
    fn from(e: DistError) -> Self {
        ScenarioError::Model(ModelError::Dist(e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiagnoseError {
    /// Fewer non-missing residuals than the operation needs.
    TooFewValues { needed: usize, found: usize },
    LagTooLarge { max_lag: usize, shortest_track: usize },
    Model(ModelError),
}

impl fmt::Display for DiagnoseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnoseError::TooFewValues { needed, found } => {
                write!(f, "need at least {needed} non-missing residuals, found {found}")
            }
            DiagnoseError::LagTooLarge { max_lag, shortest_track } => {
                write!(f, "max lag {max_lag} is not below the shortest track length {shortest_track}")
            }
            DiagnoseError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for DiagnoseError {}

impl From<ModelError> for DiagnoseError {
    fn from(e: ModelError) -> Self {
        DiagnoseError::Model(e)
    }
}
