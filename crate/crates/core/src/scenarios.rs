//! Data generators for the misspecification scenarios.
//!
//! Every generator starts from the two-state baseline HMM (gamma emissions
//! with means 0.5 and 4, shapes 0.7 and 2.5, switching probability 0.1) and
//! breaks one assumption. Scenarios 9 and 10 are well-specified three-state
//! models. Output carries the true states and generating parameters.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::{Distribution, DwellLaw, Gamma, LogNormal, PoissonDwell, SplineDensity, Uniform};
use crate::error::ScenarioError;
use crate::math::{exp, inv_logit, ln, sqrt};
use crate::model::{self, HmmSpec, InitialDistribution, ObservationSeries, SeriesTrack, StateSequence, TransitionMatrix};
use crate::rng::{categorical, standard_normal, stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioId {
    Baseline,
    /// 1 to 10.
    Numbered(u8),
}

impl ScenarioId {
    pub fn all() -> Vec<ScenarioId> {
        (1..=10).map(ScenarioId::Numbered).chain([ScenarioId::Baseline]).collect()
    }

    pub fn number(self) -> Option<u8> {
        match self {
            ScenarioId::Baseline => None,
            ScenarioId::Numbered(k) => Some(k),
        }
    }

    /// Number of states of the generating process as the fitted family sees it.
    pub fn true_n_states(self) -> usize {
        match self {
            ScenarioId::Numbered(9) | ScenarioId::Numbered(10) => 3,
            _ => 2,
        }
    }

    pub fn default_length(self) -> usize {
        match self {
            ScenarioId::Numbered(4) => 500,
            ScenarioId::Numbered(9) => 1000,
            ScenarioId::Numbered(10) => 2000,
            _ => 5000,
        }
    }

    pub fn default_tracks(self) -> usize {
        if self == ScenarioId::Numbered(4) {
            10
        } else {
            1
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioId::Baseline => f.write_str("baseline"),
            ScenarioId::Numbered(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for ScenarioId {
    type Err = ScenarioError;
    fn from_str(s: &str) -> Result<Self, ScenarioError> {
        let t = s.trim().to_ascii_lowercase();
        if t == "baseline" {
            return Ok(ScenarioId::Baseline);
        }
        let digits = t.strip_prefix("scenario").or_else(|| t.strip_prefix('s')).unwrap_or(&t).trim();
        match digits.parse::<u8>() {
            Ok(k) if (1..=10).contains(&k) => Ok(ScenarioId::Numbered(k)),
            _ => Err(ScenarioError::InvalidKnob(format!("unknown scenario '{s}'"))),
        }
    }
}

impl Serialize for ScenarioId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ScenarioId::Baseline => s.serialize_str("baseline"),
            ScenarioId::Numbered(k) => s.serialize_u8(*k),
        }
    }
}

impl<'de> Deserialize<'de> for ScenarioId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = ScenarioId;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a scenario number 1-10 or \"baseline\"")
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<ScenarioId, E> {
                match v {
                    1..=10 => Ok(ScenarioId::Numbered(v as u8)),
                    _ => Err(E::custom(format!("scenario {v} out of range 1-10"))),
                }
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<ScenarioId, E> {
                u64::try_from(v).map_err(|_| E::custom("negative scenario")).and_then(|u| self.visit_u64(u))
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<ScenarioId, E> {
                v.parse().map_err(|e: ScenarioError| E::custom(e.to_string()))
            }
        }
        d.deserialize_any(V)
    }
}

/// Scenario-specific settings. Defaults are the published settings where
/// those exist and documented reconstructions otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Knobs {
    pub outlier_fraction: f64,
    pub outlier_interval: (f64, f64),
    pub dwell_mean: f64,
    pub dwell_law: DwellLaw,
    pub heterogeneity_log_mean: f64,
    pub heterogeneity_log_sd: f64,
    pub ar_coefficient: f64,
    /// Stationary sd of the AR(1) log-mean processes.
    pub ar_sd: f64,
    pub diel_period: usize,
    pub diel_intercept: f64,
    pub diel_amplitude: f64,
    /// Slot (mod period) at which switching into the active state peaks.
    pub diel_phase: f64,
    /// Switch probability after two slots in the same state.
    pub switch_after_repeat: f64,
    /// Switch probability right after entering a state.
    pub switch_after_entry: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            outlier_fraction: 0.005,
            outlier_interval: (10.0, 20.0),
            dwell_mean: 3.0,
            dwell_law: DwellLaw::Shifted,
            heterogeneity_log_mean: ln(4.0),
            heterogeneity_log_sd: 0.15,
            ar_coefficient: 0.95,
            ar_sd: 0.5,
            diel_period: 96,
            diel_intercept: -2.2,
            diel_amplitude: 1.5,
            diel_phase: 0.0,
            switch_after_repeat: 0.25,
            switch_after_entry: 0.05,
        }
    }
}

impl Knobs {
    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidKnob(String::from(m)));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must lie in [0, 1)");
        }
        if !(self.outlier_interval.0 < self.outlier_interval.1) || !self.outlier_interval.0.is_finite() {
            return bad("outlier_interval must satisfy lo < hi");
        }
        if !(self.dwell_mean > 1.0) {
            return bad("dwell_mean must exceed 1");
        }
        if !(self.heterogeneity_log_sd > 0.0) || !self.heterogeneity_log_mean.is_finite() {
            return bad("heterogeneity_log_sd must be positive");
        }
        if !(self.ar_coefficient.abs() < 1.0) || !(self.ar_sd > 0.0) {
            return bad("AR(1) needs |coefficient| < 1 and positive sd");
        }
        if self.diel_period < 2 || !self.diel_intercept.is_finite() || !self.diel_amplitude.is_finite() {
            return bad("diel_period must be at least 2");
        }
        if !(prob(self.switch_after_repeat) && prob(self.switch_after_entry)) {
            return bad("switch probabilities must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    /// Slots per track; the scenario default when absent.
    #[serde(default)]
    pub length: Option<usize>,
    #[serde(default)]
    pub tracks: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub knobs: Knobs,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioId, seed: u64) -> Self {
        ScenarioConfig { scenario, length: None, tracks: None, seed, knobs: Knobs::default() }
    }

    pub fn with_length(mut self, length: usize) -> Self {
        self.length = Some(length);
        self
    }

    pub fn resolved_length(&self) -> usize {
        self.length.unwrap_or(self.scenario.default_length())
    }

    pub fn resolved_tracks(&self) -> usize {
        self.tracks.unwrap_or(self.scenario.default_tracks())
    }
}

/// Generating parameters recorded next to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub description: String,
    /// Nominal state-dependent means and gamma shapes, in state order; the
    /// shape is absent for non-gamma states.
    pub means: Vec<f64>,
    pub shapes: Vec<Option<f64>>,
    pub tpm: Vec<Vec<f64>>,
    /// Scenario 1: contaminated slots of the single track, ascending.
    pub contaminated: Vec<usize>,
    /// Scenario 4: per-track state-2 means.
    pub track_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutput {
    pub scenario: ScenarioId,
    pub data: ObservationSeries,
    pub true_states: StateSequence,
    pub truth: ScenarioTruth,
}

const BASE_MEANS: [f64; 2] = [0.5, 4.0];
const BASE_SHAPES: [f64; 2] = [0.7, 2.5];

/// The two-state gamma HMM all scenarios perturb.
pub fn baseline_model() -> HmmSpec {
    HmmSpec::univariate(
        TransitionMatrix::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).expect("valid"),
        vec![Distribution::gamma(BASE_MEANS[0], BASE_SHAPES[0]).unwrap(), Distribution::gamma(BASE_MEANS[1], BASE_SHAPES[1]).unwrap()],
    )
    .expect("valid baseline")
}

fn three_state(means: [f64; 3], shapes: [f64; 3], stay: f64, off: f64) -> HmmSpec {
    let rows = (0..3).map(|i| (0..3).map(|j| if i == j { stay } else { off }).collect()).collect();
    HmmSpec::univariate(
        TransitionMatrix::new(rows).expect("valid"),
        means.iter().zip(&shapes).map(|(&m, &k)| Distribution::gamma(m, k).unwrap()).collect(),
    )
    .expect("valid three-state model")
}

pub fn scenario9_model() -> HmmSpec {
    three_state([0.5, 1.5, 3.0], [2.0, 3.0, 4.0], 0.9, 0.05)
}

pub fn scenario10_model() -> HmmSpec {
    three_state([5.5, 3.0, 1.0], [12.0, 4.0, 1.5], 0.8, 0.1)
}

/// Transition matrix of the three-state representation of a two-state HMM
/// whose second state emits a two-component mixture with weights α, 1 − α.
pub fn equivalent_three_state_tpm(gamma11: f64, gamma22: f64, alpha: f64) -> Result<TransitionMatrix, ScenarioError> {
    let prob = |p: f64| (0.0..=1.0).contains(&p);
    if !(prob(gamma11) && prob(gamma22)) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(ScenarioError::InvalidKnob(String::from("need probabilities and 0 < alpha < 1")));
    }
    let first = vec![gamma11, alpha * (1.0 - gamma11), (1.0 - alpha) * (1.0 - gamma11)];
    let other = vec![1.0 - gamma22, alpha * gamma22, (1.0 - alpha) * gamma22];
    Ok(TransitionMatrix::new(vec![first, other.clone(), other])?)
}

fn single_track(values: Vec<f64>, labels: Option<Vec<u32>>) -> Result<SeriesTrack, ScenarioError> {
    Ok(SeriesTrack::new(1, values.into_iter().map(Some).collect(), labels)?)
}

fn truth(description: &str, model: &HmmSpec) -> ScenarioTruth {
    let (means, shapes) = model.channels()[0]
        .iter()
        .map(|d| match d {
            Distribution::Gamma(g) => (g.mean(), Some(g.shape())),
            other => (other.mean(), None),
        })
        .unzip();
    ScenarioTruth {
        description: String::from(description),
        means,
        shapes,
        tpm: model.tpm().rows(),
        contaminated: Vec::new(),
        track_means: Vec::new(),
    }
}

/// Generates one data set; deterministic for a fixed config.
pub fn generate(config: &ScenarioConfig) -> Result<ScenarioOutput, ScenarioError> {
    config.knobs.validate()?;
    let t = config.resolved_length();
    let n_tracks = config.resolved_tracks();
    if t < 2 || n_tracks == 0 {
        return Err(ScenarioError::InvalidKnob(String::from("need at least one track of length 2")));
    }
    let k = &config.knobs;
    let mut rng = stream(config.seed);
    let base = baseline_model();
    let lengths = vec![t; n_tracks];

    let (data, states, truth) = match config.scenario {
        ScenarioId::Baseline | ScenarioId::Numbered(8) => {
            let (d, s) = model::simulate(&base, &lengths, &mut rng)?;
            (d, s, truth("baseline two-state gamma HMM", &base))
        }
        ScenarioId::Numbered(1) => {
            let (d, s) = model::simulate(&base, &lengths, &mut rng)?;
            let noise = Uniform::new(k.outlier_interval.0, k.outlier_interval.1)?;
            let mut tracks = Vec::new();
            let mut contaminated = Vec::new();
            for (ti, tr) in d.tracks().iter().enumerate() {
                let mut values: Vec<f64> = tr.channel(0).map(|v| v.unwrap()).collect();
                let count = libm::floor(k.outlier_fraction * t as f64) as usize;
                let mut idx = sample_indices(&mut rng, t, count).into_vec();
                idx.sort_unstable();
                for &i in &idx {
                    values[i] += noise.sample(&mut rng);
                }
                if ti == 0 {
                    contaminated = idx;
                }
                tracks.push(single_track(values, None)?);
            }
            let mut tr = truth("baseline plus uniform additive outliers", &base);
            tr.contaminated = contaminated;
            (ObservationSeries::new(tracks)?, s, tr)
        }
        ScenarioId::Numbered(2) => {
            let m = HmmSpec::univariate(
                base.tpm().clone(),
                vec![base.emission(0, 0).clone(), Distribution::SplineDensity(SplineDensity::scenario2())],
            )?;
            let (d, s) = model::simulate(&m, &lengths, &mut rng)?;
            (d, s, truth("state 2 emits the bundled heavy-tailed spline density", &m))
        }
        ScenarioId::Numbered(3) => {
            let (d, s) = diel(&base, k, &lengths, &mut rng)?;
            (d, s, truth("time-of-day dependent switching", &base))
        }
        ScenarioId::Numbered(4) => {
            let het = LogNormal::new(k.heterogeneity_log_mean, k.heterogeneity_log_sd)?;
            let mut tracks = Vec::new();
            let mut paths = Vec::new();
            let mut track_means = Vec::new();
            for _ in 0..n_tracks {
                let mu2 = het.sample(&mut rng);
                let m = HmmSpec::univariate(
                    base.tpm().clone(),
                    vec![base.emission(0, 0).clone(), Distribution::gamma(mu2, BASE_SHAPES[1])?],
                )?;
                let (d, s) = model::simulate(&m, &[t], &mut rng)?;
                tracks.push(d.tracks()[0].clone());
                paths.push(s.tracks.into_iter().next().unwrap());
                track_means.push(mu2);
            }
            let mut tr = truth("per-track log-normal state-2 mean", &base);
            tr.track_means = track_means;
            (ObservationSeries::new(tracks)?, StateSequence { tracks: paths }, tr)
        }
        ScenarioId::Numbered(5) => {
            let dwell = PoissonDwell::new(k.dwell_mean, k.dwell_law)?;
            let mut tracks = Vec::new();
            let mut paths = Vec::new();
            for _ in 0..n_tracks {
                let path = semi_markov_path(t, &dwell, &mut rng);
                tracks.push(emit(&base, &path, &mut rng)?);
                paths.push(path);
            }
            (ObservationSeries::new(tracks)?, StateSequence { tracks: paths }, truth("state-2 dwell times from a shifted Poisson law", &base))
        }
        ScenarioId::Numbered(6) => {
            let mut tracks = Vec::new();
            let mut paths = Vec::new();
            for _ in 0..n_tracks {
                let path = second_order_path(t, k.switch_after_repeat, k.switch_after_entry, &mut rng);
                tracks.push(emit(&base, &path, &mut rng)?);
                paths.push(path);
            }
            (ObservationSeries::new(tracks)?, StateSequence { tracks: paths }, truth("second-order state process", &base))
        }
        ScenarioId::Numbered(7) => {
            let mut tracks = Vec::new();
            let mut paths = Vec::new();
            for _ in 0..n_tracks {
                let path = markov_path(base.tpm(), base.initial_probabilities(), t, &mut rng);
                let innovation = k.ar_sd * sqrt(1.0 - k.ar_coefficient * k.ar_coefficient);
                let mut level = [k.ar_sd * standard_normal(&mut rng), k.ar_sd * standard_normal(&mut rng)];
                let mut values = Vec::with_capacity(t);
                for (slot, &s) in path.iter().enumerate() {
                    if slot > 0 {
                        for l in level.iter_mut() {
                            *l = k.ar_coefficient * *l + innovation * standard_normal(&mut rng);
                        }
                    }
                    let g = Gamma::new(BASE_MEANS[s] * exp(level[s]), BASE_SHAPES[s])?;
                    values.push(g.sample(&mut rng));
                }
                tracks.push(single_track(values, None)?);
                paths.push(path);
            }
            (ObservationSeries::new(tracks)?, StateSequence { tracks: paths }, truth("AR(1) log-means within states", &base))
        }
        ScenarioId::Numbered(9) | ScenarioId::Numbered(10) => {
            let m = if config.scenario == ScenarioId::Numbered(9) { scenario9_model() } else { scenario10_model() };
            let (d, s) = model::simulate(&m, &lengths, &mut rng)?;
            (d, s, truth("well-specified three-state gamma HMM", &m))
        }
        ScenarioId::Numbered(other) => {
            return Err(ScenarioError::InvalidKnob(format!("unknown scenario {other}")));
        }
    };
    Ok(ScenarioOutput { scenario: config.scenario, data, true_states: states, truth })
}

fn markov_path(tpm: &TransitionMatrix, init: &[f64], t: usize, rng: &mut Stream) -> Vec<usize> {
    let mut path = Vec::with_capacity(t);
    let mut s = categorical(rng, init);
    path.push(s);
    for _ in 1..t {
        s = categorical(rng, tpm.row(s));
        path.push(s);
    }
    path
}

fn emit(model: &HmmSpec, path: &[usize], rng: &mut Stream) -> Result<SeriesTrack, ScenarioError> {
    single_track(path.iter().map(|&s| model.emission(0, s).sample(rng)).collect(), None)
}

/// γ12 and γ21 at a time-of-day slot; opposite phases so that switching
/// into the active state peaks at `diel_phase` and switching out of it
/// peaks half a period later.
pub fn diel_switching(k: &Knobs, slot: usize) -> (f64, f64) {
    let c = libm::cos(2.0 * PI * (slot as f64 - k.diel_phase) / k.diel_period as f64);
    (inv_logit(k.diel_intercept + k.diel_amplitude * c), inv_logit(k.diel_intercept - k.diel_amplitude * c))
}

fn diel(base: &HmmSpec, k: &Knobs, lengths: &[usize], rng: &mut Stream) -> Result<(ObservationSeries, StateSequence), ScenarioError> {
    let mut tracks = Vec::new();
    let mut paths = Vec::new();
    for &t in lengths {
        let labels: Vec<u32> = (0..t).map(|i| (i % k.diel_period) as u32).collect();
        // start from the stationary law of the first slot's matrix
        let (a, b) = diel_switching(k, 0);
        let mut s = categorical(rng, &[b / (a + b), a / (a + b)]);
        let mut path = Vec::with_capacity(t);
        path.push(s);
        for &label in &labels[1..] {
            let (up, down) = diel_switching(k, label as usize);
            let leave = if s == 0 { up } else { down };
            if rng.random::<f64>() < leave {
                s = 1 - s;
            }
            path.push(s);
        }
        let values = path.iter().map(|&s| base.emission(0, s).sample(rng)).collect();
        tracks.push(single_track(values, Some(labels))?);
        paths.push(path);
    }
    Ok((ObservationSeries::new(tracks)?, StateSequence { tracks: paths }))
}

/// Alternating two-state path: geometric dwell in state 1 (leave prob 0.1),
/// `dwell` in state 2. The initial state is drawn proportional to mean dwell.
fn semi_markov_path(t: usize, dwell: &PoissonDwell, rng: &mut Stream) -> Vec<usize> {
    let mean1 = 10.0;
    let mut s = categorical(rng, &[mean1 / (mean1 + dwell.mean()), dwell.mean() / (mean1 + dwell.mean())]);
    let mut path = Vec::with_capacity(t);
    while path.len() < t {
        let len = if s == 0 {
            let mut n = 1;
            while rng.random::<f64>() >= 0.1 {
                n += 1;
            }
            n
        } else {
            dwell.sample(rng) as usize
        };
        for _ in 0..len.min(t - path.len()) {
            path.push(s);
        }
        s = 1 - s;
    }
    path
}

/// Second-order chain: switching probability depends on whether the last
/// two slots were in the same state. The first slot is uniform and the
/// second is treated as following a fresh entry.
fn second_order_path(t: usize, after_repeat: f64, after_entry: f64, rng: &mut Stream) -> Vec<usize> {
    let mut path = Vec::with_capacity(t);
    path.push(usize::from(rng.random::<f64>() < 0.5));
    for i in 1..t {
        let prev = path[i - 1];
        let repeated = i >= 2 && path[i - 2] == prev;
        let p = if repeated { after_repeat } else { after_entry };
        path.push(if rng.random::<f64>() < p { 1 - prev } else { prev });
    }
    path
}

/// Two-state model with a gamma mixture in state 2 and its equivalent
/// three-state gamma HMM.
pub fn mixture_pair(gamma11: f64, gamma22: f64, alpha: f64, gammas: [Gamma; 3]) -> Result<(HmmSpec, HmmSpec), ScenarioError> {
    let two = HmmSpec::univariate(
        TransitionMatrix::new(vec![vec![gamma11, 1.0 - gamma11], vec![1.0 - gamma22, gamma22]])?,
        vec![
            Distribution::Gamma(gammas[0]),
            Distribution::GammaMixture(crate::dist::GammaMixture::new(vec![alpha, 1.0 - alpha], vec![gammas[1], gammas[2]])?),
        ],
    )?;
    let three = HmmSpec::new(
        equivalent_three_state_tpm(gamma11, gamma22, alpha)?,
        InitialDistribution::Stationary,
        vec![gammas.iter().map(|g| Distribution::Gamma(*g)).collect()],
    )?;
    Ok((two, three))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(id: u8, seed: u64) -> ScenarioOutput {
        generate(&ScenarioConfig::new(ScenarioId::Numbered(id), seed)).unwrap()
    }

    #[test]
    fn baseline_values() {
        let m = baseline_model();
        assert_eq!(m.tpm().rows(), vec![vec![0.9, 0.1], vec![0.1, 0.9]]);
        assert_eq!(m.initial_probabilities(), &[0.5, 0.5]);
        // geometric dwell pmf p(k) = 0.1·0.9^{k−1}
        let leave = 1.0 - m.tpm().get(0, 0);
        assert!((leave - 0.1).abs() < 1e-15);
        assert!((leave * m.tpm().get(0, 0) - 0.09).abs() < 1e-15);
    }

    #[test]
    fn scenario_one_contamination() {
        let out = gen(1, 4);
        assert_eq!(out.truth.contaminated.len(), 25);
        // regenerate the uncontaminated series from the same stream prefix
        let clean = generate(&ScenarioConfig::new(ScenarioId::Numbered(8), 4)).unwrap();
        let a: Vec<f64> = out.data.channel_values(0);
        let b: Vec<f64> = clean.data.channel_values(0);
        let mut k = 0;
        for i in 0..a.len() {
            let d = a[i] - b[i];
            if out.truth.contaminated.contains(&i) {
                assert!((10.0..=20.0).contains(&d));
                k += 1;
            } else {
                assert_eq!(d, 0.0);
            }
        }
        assert_eq!(k, 25);
    }

    #[test]
    fn sample_sizes() {
        assert_eq!(gen(9, 1).data.lengths(), vec![1000]);
        assert_eq!(gen(10, 1).data.lengths(), vec![2000]);
        assert_eq!(gen(4, 1).data.lengths(), vec![500; 10]);
        assert_eq!(gen(3, 1).data.lengths(), vec![5000]);
        assert_eq!(gen(9, 1).truth.means, vec![0.5, 1.5, 3.0]);
        assert_eq!(gen(9, 1).truth.shapes, vec![Some(2.0), Some(3.0), Some(4.0)]);
        assert_eq!(gen(9, 1).truth.tpm[0], vec![0.9, 0.05, 0.05]);
    }

    #[test]
    fn second_order_switch_frequency() {
        let path = second_order_path(100_000, 0.25, 0.05, &mut stream(8));
        let (mut fresh, mut switched) = (0usize, 0usize);
        for i in 2..path.len() {
            if path[i - 1] != path[i - 2] {
                fresh += 1;
                switched += usize::from(path[i] != path[i - 1]);
            }
        }
        assert!((switched as f64 / fresh as f64 - 0.05).abs() < 0.01);
    }

    #[test]
    fn poisson_dwell_mean() {
        let dwell = PoissonDwell::new(3.0, DwellLaw::Shifted).unwrap();
        let path = semi_markov_path(100_000, &dwell, &mut stream(3));
        let mut runs = Vec::new();
        let mut i = 0;
        while i < path.len() {
            let j = (i..path.len()).find(|&j| path[j] != path[i]).unwrap_or(path.len());
            // skip the truncated final run
            if path[i] == 1 && j < path.len() {
                runs.push(j - i);
            }
            i = j;
        }
        assert!(runs.iter().all(|&r| r >= 1));
        let m = runs.iter().sum::<usize>() as f64 / runs.len() as f64;
        assert!((m - 3.0).abs() < 0.1, "{m}");
    }

    #[test]
    fn diel_switching_is_more_active_at_night() {
        let k = Knobs::default();
        let (night_up, night_down) = diel_switching(&k, 0);
        let (day_up, day_down) = diel_switching(&k, 48);
        assert!(night_up > day_up && night_down < day_down);
        assert!(night_up < 0.36 && day_up > 0.019);
        let out = gen(3, 2);
        let path = &out.true_states.tracks[0];
        let labels = out.data.tracks()[0].labels().unwrap();
        let rate = |night: bool| {
            let (mut from1, mut up) = (0usize, 0usize);
            for t in 1..path.len() {
                let l = labels[t] as usize;
                let is_night = !(24..72).contains(&l);
                if is_night == night && path[t - 1] == 0 {
                    from1 += 1;
                    up += usize::from(path[t] == 1);
                }
            }
            up as f64 / from1 as f64
        };
        assert!(rate(true) > rate(false));
    }

    #[test]
    fn ar_within_state_correlation() {
        let cfg = ScenarioConfig::new(ScenarioId::Numbered(7), 12).with_length(100_000);
        let out = generate(&cfg).unwrap();
        let x = out.data.channel_values(0);
        let s = &out.true_states.tracks[0];
        let pairs: Vec<(f64, f64)> = (1..x.len()).filter(|&t| s[t] == 1 && s[t - 1] == 1).map(|t| (ln(x[t - 1]), ln(x[t]))).collect();
        let n = pairs.len() as f64;
        let (ma, mb) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
        let cov = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>();
        let va = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>();
        let vb = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>();
        assert!(cov / sqrt(va * vb) > 0.3, "{}", cov / sqrt(va * vb));
    }

    #[test]
    fn three_state_equivalence_display() {
        let m = equivalent_three_state_tpm(0.9, 0.9, 0.5).unwrap();
        assert!(m.row(0)[0] == 0.9 && (m.row(0)[1] - 0.05).abs() < 1e-15 && (m.row(0)[2] - 0.05).abs() < 1e-15);
        let lim = equivalent_three_state_tpm(0.9, 0.8, 1.0 - 1e-12).unwrap();
        assert!((0..3).all(|i| lim.get(i, 2) < 1e-11));
        assert!(equivalent_three_state_tpm(0.9, 0.9, 1.0).is_err());
    }

    #[test]
    fn invalid_knobs_rejected() {
        let mut cfg = ScenarioConfig::new(ScenarioId::Numbered(7), 1);
        cfg.knobs.ar_coefficient = 1.0;
        assert!(generate(&cfg).is_err());
        assert!(generate(&ScenarioConfig::new(ScenarioId::Numbered(1), 1).with_length(1)).is_err());
        assert!("11".parse::<ScenarioId>().is_err());
        assert_eq!("s3".parse::<ScenarioId>().unwrap(), ScenarioId::Numbered(3));
    }

    #[test]
    fn generators_are_deterministic() {
        for id in ScenarioId::all() {
            let cfg = ScenarioConfig::new(id, 77).with_length(300);
            assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        }
    }
}
