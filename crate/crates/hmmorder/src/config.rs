//! Per-subcommand configuration files (TOML). Relative paths inside a file
//! are resolved against the file's own directory. Flags override fields.

use std::path::{Path, PathBuf};

use hmmorder_core::fit::{FitConfig, ModelFamily};
use hmmorder_core::scenarios::ScenarioConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentPlan;
use crate::files::read_text;

/// Parses a configuration file, returning it with its raw bytes.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>)> {
    let text = read_text(path)?;
    let value = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string().trim_end()))?;
    Ok((value, text.into_bytes()))
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// `simulate`: a scenario configuration (scenario, length, tracks, seed, [knobs]).
pub type SimulateConfig = ScenarioConfig;

/// `bench`: an experiment plan.
pub type BenchConfig = ExperimentPlan;

fn default_family() -> ModelFamily {
    ModelFamily::Gamma
}

fn default_starts() -> usize {
    25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRunConfig {
    /// Dataset in the columnar format.
    pub data: PathBuf,
    #[serde(default = "default_family")]
    pub family: ModelFamily,
    pub n_states: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub fit: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectConfig {
    pub data: PathBuf,
    #[serde(default = "default_family")]
    pub family: ModelFamily,
    pub n_range: Vec<usize>,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub fit: FitConfig,
}

fn default_max_lag() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub data: PathBuf,
    /// A model document (`model.json`) or a fit result (`fit.json`).
    pub model: PathBuf,
    #[serde(default)]
    pub channel: usize,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    /// Drives the randomization at point masses only.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTracks {
    #[serde(default = "default_synthetic_tracks")]
    pub tracks: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_missing")]
    pub missing_fraction: f64,
}

fn default_synthetic_tracks() -> usize {
    1
}

fn default_points() -> usize {
    2000
}

fn default_missing() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementConfig {
    /// Telemetry file; exactly one of `tracks` and `synthetic` is required.
    #[serde(default)]
    pub tracks: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticTracks>,
    /// Sampling interval in seconds (inferred when absent).
    #[serde(default)]
    pub interval: Option<i64>,
    #[serde(default = "default_movement_range")]
    pub n_range: Vec<usize>,
    #[serde(default = "default_movement_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_movement_lag")]
    pub max_lag: usize,
    #[serde(default)]
    pub fit: FitConfig,
}

fn default_movement_range() -> Vec<usize> {
    vec![2, 3, 4, 5]
}

fn default_movement_starts() -> usize {
    50
}

fn default_movement_lag() -> usize {
    48
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_parse_with_defaults() {
        let c: SelectConfig = toml::from_str("data = \"d.csv\"\nn_range = [2, 3]").unwrap();
        assert_eq!((c.family, c.starts, c.seed), (ModelFamily::Gamma, 25, 0));
        let c: MovementConfig = toml::from_str("[synthetic]\npoints = 500").unwrap();
        assert_eq!(c.synthetic.unwrap().points, 500);
        assert_eq!(c.n_range, vec![2, 3, 4, 5]);
        let c: FitRunConfig = toml::from_str("data = \"d.csv\"\nn_states = 3\nfamily = \"zero_inflated_gamma_von_mises\"\n[fit.bounds]\nshape_max = 40.0").unwrap();
        assert_eq!(c.fit.bounds.shape_max, 40.0);
        assert!(toml::from_str::<DiagnoseConfig>("data = \"d\"").is_err());
        assert_eq!(resolve(Path::new("/a/b/c.toml"), Path::new("d.csv")), PathBuf::from("/a/b/d.csv"));
    }
}
