//! HMM representation and the exact core algorithms.
//!
//! States are indexed from zero in this API; file formats written by the
//! `hmmorder` crate report them from one.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::ModelError;
use crate::math::{self, exp, ln};
use crate::rng::categorical;

const ROW_SUM_TOL: f64 = 1e-10;

/// Row-stochastic N×N matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = ModelError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        TransitionMatrix::new(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(m: TransitionMatrix) -> Self {
        m.rows()
    }
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let n = rows.len();
        if n == 0 {
            return Err(ModelError::InvalidTpm(String::from("empty matrix")));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::InvalidTpm(format!("row {i} has {} entries", row.len())));
            }
            data.extend_from_slice(row);
        }
        TransitionMatrix::from_flat(n, data)
    }

    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        if n == 0 || data.len() != n * n {
            return Err(ModelError::InvalidTpm(String::from("dimension mismatch")));
        }
        for i in 0..n {
            let row = &data[i * n..(i + 1) * n];
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(ModelError::InvalidTpm(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(ModelError::InvalidTpm(format!("row {i} sums to {s}")));
            }
        }
        Ok(TransitionMatrix { n, data })
    }

    /// Caller guarantees a row-stochastic matrix (e.g. a softmax image).
    pub(crate) fn from_flat_unchecked(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        TransitionMatrix { n, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        TransitionMatrix { n, data }
    }

    /// Constant diagonal `stay`, remaining mass split evenly off the diagonal.
    pub fn uniform_switching(n: usize, stay: f64) -> Result<Self, ModelError> {
        if n == 1 {
            return Ok(TransitionMatrix::identity(1));
        }
        let off = (1.0 - stay) / (n - 1) as f64;
        let mut data = vec![off; n * n];
        for i in 0..n {
            data[i * n + i] = stay;
        }
        TransitionMatrix::from_flat(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    fn is_irreducible(&self) -> bool {
        let n = self.n;
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let p = if forward { self.get(i, j) } else { self.get(j, i) };
                    if p > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}

/// Solution δ of δΓ = δ, Σδ = 1 for an irreducible chain.
pub fn stationary_distribution(tpm: &TransitionMatrix) -> Result<Vec<f64>, ModelError> {
    let n = tpm.n();
    if !tpm.is_irreducible() {
        return Err(ModelError::Reducible);
    }
    // δ (I − Γ + U) = 1ᵀ with U the all-ones matrix
    let a = fundamental_system(tpm);
    let ones = vec![1.0; n];
    let mut delta = math::solve_left(&a, &ones, n).ok_or(ModelError::Reducible)?;
    for d in delta.iter_mut() {
        if *d < 0.0 {
            *d = 0.0;
        }
    }
    let s: f64 = delta.iter().sum();
    delta.iter_mut().for_each(|d| *d /= s);
    Ok(delta)
}

/// I − Γ + U, whose inverse also gives the derivative of δ with respect to Γ.
pub(crate) fn fundamental_system(tpm: &TransitionMatrix) -> Vec<f64> {
    let n = tpm.n();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = if i == j { 1.0 } else { 0.0 } - tpm.get(i, j) + 1.0;
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialDistribution {
    Stationary,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HmmSpecRaw {
    tpm: TransitionMatrix,
    init: InitialDistribution,
    channels: Vec<Vec<Distribution>>,
}

/// An N-state HMM with one emission distribution per state and channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HmmSpecRaw", into = "HmmSpecRaw")]
pub struct HmmSpec {
    tpm: TransitionMatrix,
    init: InitialDistribution,
    channels: Vec<Vec<Distribution>>,
    delta: Vec<f64>,
}

impl TryFrom<HmmSpecRaw> for HmmSpec {
    type Error = ModelError;
    fn try_from(raw: HmmSpecRaw) -> Result<Self, ModelError> {
        for channel in &raw.channels {
            for d in channel {
                d.validate()?;
            }
        }
        HmmSpec::new(raw.tpm, raw.init, raw.channels)
    }
}

impl From<HmmSpec> for HmmSpecRaw {
    fn from(m: HmmSpec) -> Self {
        HmmSpecRaw { tpm: m.tpm, init: m.init, channels: m.channels }
    }
}

impl HmmSpec {
    pub fn new(
        tpm: TransitionMatrix,
        init: InitialDistribution,
        channels: Vec<Vec<Distribution>>,
    ) -> Result<Self, ModelError> {
        let n = tpm.n();
        if channels.is_empty() {
            return Err(ModelError::ChannelMismatch { expected: 1, found: 0 });
        }
        for (c, ch) in channels.iter().enumerate() {
            if ch.len() != n {
                return Err(ModelError::StateCountMismatch { channel: c, expected: n, found: ch.len() });
            }
        }
        let delta = match &init {
            InitialDistribution::Stationary => stationary_distribution(&tpm)?,
            InitialDistribution::Fixed(d) => {
                if d.len() != n {
                    return Err(ModelError::InvalidInitial(format!("length {} for {n} states", d.len())));
                }
                if d.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(ModelError::InvalidInitial(String::from("negative or non-finite entry")));
                }
                let s: f64 = d.iter().sum();
                if (s - 1.0).abs() > ROW_SUM_TOL {
                    return Err(ModelError::InvalidInitial(format!("sums to {s}")));
                }
                d.clone()
            }
        };
        Ok(HmmSpec { tpm, init, channels, delta })
    }

    /// Single-channel model with stationary initial distribution.
    pub fn univariate(tpm: TransitionMatrix, emissions: Vec<Distribution>) -> Result<Self, ModelError> {
        HmmSpec::new(tpm, InitialDistribution::Stationary, vec![emissions])
    }

    pub fn n_states(&self) -> usize {
        self.tpm.n()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn tpm(&self) -> &TransitionMatrix {
        &self.tpm
    }

    pub fn init(&self) -> &InitialDistribution {
        &self.init
    }

    pub fn channels(&self) -> &[Vec<Distribution>] {
        &self.channels
    }

    pub fn emission(&self, channel: usize, state: usize) -> &Distribution {
        &self.channels[channel][state]
    }

    /// δ: the stationary distribution or the fixed initial vector.
    pub fn initial_probabilities(&self) -> &[f64] {
        &self.delta
    }

    /// Relabels states so that new state `i` is old state `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<HmmSpec, ModelError> {
        let n = self.n_states();
        if perm.len() != n || {
            let mut seen = vec![false; n];
            perm.iter().any(|&p| p >= n || core::mem::replace(&mut seen[p], true))
        } {
            return Err(ModelError::IndexOutOfRange("permutation"));
        }
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = self.tpm.get(perm[i], perm[j]);
            }
        }
        let tpm = TransitionMatrix { n, data };
        let init = match &self.init {
            InitialDistribution::Stationary => InitialDistribution::Stationary,
            InitialDistribution::Fixed(d) => InitialDistribution::Fixed(perm.iter().map(|&p| d[p]).collect()),
        };
        let channels = self
            .channels
            .iter()
            .map(|ch| perm.iter().map(|&p| ch[p].clone()).collect())
            .collect();
        let delta = perm.iter().map(|&p| self.delta[p]).collect();
        Ok(HmmSpec { tpm, init, channels, delta })
    }

    /// Permutation ordering states by ascending first-channel emission mean.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_states()).collect();
        order.sort_by(|&a, &b| self.channels[0][a].mean().total_cmp(&self.channels[0][b].mean()).then(a.cmp(&b)));
        order
    }

    pub fn canonicalized(&self) -> HmmSpec {
        self.permuted(&self.canonical_order()).expect("canonical order is a permutation")
    }

    fn check_data(&self, data: &ObservationSeries) -> Result<(), ModelError> {
        if data.n_channels() != self.n_channels() {
            return Err(ModelError::ChannelMismatch { expected: self.n_channels(), found: data.n_channels() });
        }
        Ok(())
    }

    /// Log emission matrix (T×N, row-major) for one track; missing channels contribute 0.
    pub(crate) fn log_emissions(&self, track: &SeriesTrack) -> Vec<f64> {
        let n = self.n_states();
        let t_len = track.len();
        let mut out = vec![0.0; t_len * n];
        for t in 0..t_len {
            for (c, ch) in self.channels.iter().enumerate() {
                if let Some(x) = track.get(t, c) {
                    for (i, d) in ch.iter().enumerate() {
                        out[t * n + i] += d.log_pdf(x);
                    }
                }
            }
        }
        out
    }
}

/// One track of observations: `len` slots × `n_channels` optional values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTrack {
    n_channels: usize,
    values: Vec<Option<f64>>,
    labels: Option<Vec<u32>>,
}

impl SeriesTrack {
    pub fn new(n_channels: usize, values: Vec<Option<f64>>, labels: Option<Vec<u32>>) -> Result<Self, ModelError> {
        if n_channels == 0 || values.len() % n_channels != 0 {
            return Err(ModelError::ChannelMismatch { expected: n_channels, found: values.len() });
        }
        let len = values.len() / n_channels;
        if let Some(l) = &labels {
            if l.len() != len {
                return Err(ModelError::IndexOutOfRange("time label"));
            }
        }
        Ok(SeriesTrack { n_channels, values, labels })
    }

    pub fn univariate(values: &[f64]) -> Self {
        SeriesTrack { n_channels: 1, values: values.iter().map(|&v| Some(v)).collect(), labels: None }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.n_channels
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    #[inline]
    pub fn get(&self, t: usize, channel: usize) -> Option<f64> {
        self.values[t * self.n_channels + channel]
    }

    pub fn slot(&self, t: usize) -> &[Option<f64>] {
        &self.values[t * self.n_channels..(t + 1) * self.n_channels]
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn channel(&self, c: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.len()).map(move |t| self.get(t, c))
    }

    pub fn observed_slots(&self) -> usize {
        (0..self.len()).filter(|&t| self.slot(t).iter().any(Option::is_some)).count()
    }
}

/// One or more independent tracks sharing a channel layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    n_channels: usize,
    tracks: Vec<SeriesTrack>,
}

impl ObservationSeries {
    pub fn new(tracks: Vec<SeriesTrack>) -> Result<Self, ModelError> {
        let n_channels = tracks.first().map(|t| t.n_channels).ok_or(ModelError::IndexOutOfRange("track"))?;
        for (k, t) in tracks.iter().enumerate() {
            if t.n_channels != n_channels {
                return Err(ModelError::ChannelMismatch { expected: n_channels, found: t.n_channels });
            }
            if t.len() < 2 {
                return Err(ModelError::TrackTooShort { track: k, len: t.len() });
            }
        }
        Ok(ObservationSeries { n_channels, tracks })
    }

    pub fn univariate(tracks: &[Vec<f64>]) -> Result<Self, ModelError> {
        ObservationSeries::new(tracks.iter().map(|t| SeriesTrack::univariate(t)).collect())
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn tracks(&self) -> &[SeriesTrack] {
        &self.tracks
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.tracks.iter().map(SeriesTrack::len).collect()
    }

    /// Slots with at least one observed channel, summed over tracks.
    pub fn data_size(&self) -> usize {
        self.tracks.iter().map(SeriesTrack::observed_slots).sum()
    }

    /// All present values of one channel, in track order.
    pub fn channel_values(&self, c: usize) -> Vec<f64> {
        self.tracks.iter().flat_map(|t| t.channel(c).flatten()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSequence {
    pub tracks: Vec<Vec<usize>>,
}

impl StateSequence {
    pub fn occupancy(&self, n_states: usize) -> Vec<f64> {
        let mut counts = vec![0usize; n_states];
        let mut total = 0usize;
        for s in self.tracks.iter().flatten() {
            counts[*s] += 1;
            total += 1;
        }
        counts.into_iter().map(|c| c as f64 / total.max(1) as f64).collect()
    }
}

/// Normalized forward probabilities for one track plus the log-likelihood.
pub(crate) struct ForwardPass {
    /// α̂_t: filtered state probabilities, T×N.
    pub filtered: Vec<f64>,
    /// exp(log emission − shift), T×N.
    pub em: Vec<f64>,
    /// Per-step normalizer c_t in the shifted scale.
    pub scale: Vec<f64>,
    pub log_lik: f64,
}

/// Scaled forward recursion. Each step's emission row is shifted by its
/// maximum before exponentiation; the shift is added back in log space.
pub(crate) fn forward_pass(init: &[f64], tpm: &TransitionMatrix, mut log_em: Vec<f64>, n: usize) -> ForwardPass {
    let t_len = log_em.len() / n;
    let mut filtered = vec![0.0; t_len * n];
    let mut scale = vec![0.0; t_len];
    let mut log_lik = 0.0;
    let mut pred = vec![0.0; n];
    for t in 0..t_len {
        let row = &mut log_em[t * n..(t + 1) * n];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY || m.is_nan() {
            return ForwardPass { filtered, em: log_em, scale, log_lik: f64::NEG_INFINITY };
        }
        row.iter_mut().for_each(|v| *v = exp(*v - m));
        if t == 0 {
            pred.copy_from_slice(init);
        } else {
            let prev = &filtered[(t - 1) * n..t * n];
            for (j, p) in pred.iter_mut().enumerate() {
                *p = (0..n).map(|i| prev[i] * tpm.get(i, j)).sum();
            }
        }
        let mut c = 0.0;
        for j in 0..n {
            let v = pred[j] * row[j];
            filtered[t * n + j] = v;
            c += v;
        }
        if !(c > 0.0) || !c.is_finite() {
            return ForwardPass { filtered, em: log_em, scale, log_lik: f64::NEG_INFINITY };
        }
        filtered[t * n..(t + 1) * n].iter_mut().for_each(|v| *v /= c);
        scale[t] = c;
        log_lik += ln(c) + m;
    }
    ForwardPass { filtered, em: log_em, scale, log_lik }
}

/// log L(θ | x): product over tracks of scaled-forward likelihoods.
pub fn log_likelihood(model: &HmmSpec, data: &ObservationSeries) -> Result<f64, ModelError> {
    model.check_data(data)?;
    let n = model.n_states();
    let mut total = 0.0;
    for track in data.tracks() {
        let pass = forward_pass(model.initial_probabilities(), model.tpm(), model.log_emissions(track), n);
        total += pass.log_lik;
    }
    Ok(total)
}

/// Most probable state path per track; ties go to the lower state index.
pub fn viterbi(model: &HmmSpec, data: &ObservationSeries) -> Result<StateSequence, ModelError> {
    model.check_data(data)?;
    let n = model.n_states();
    let log_tpm: Vec<f64> = model.tpm().as_slice().iter().map(|&p| ln(p)).collect();
    let log_init: Vec<f64> = model.initial_probabilities().iter().map(|&p| ln(p)).collect();
    let mut out = Vec::with_capacity(data.tracks().len());
    for track in data.tracks() {
        let em = model.log_emissions(track);
        let t_len = track.len();
        let mut score: Vec<f64> = (0..n).map(|i| log_init[i] + em[i]).collect();
        let mut back = vec![0usize; t_len * n];
        let mut next = vec![0.0; n];
        for t in 1..t_len {
            for j in 0..n {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for i in 0..n {
                    let v = score[i] + log_tpm[i * n + j];
                    if v > best {
                        best = v;
                        arg = i;
                    }
                }
                back[t * n + j] = arg;
                next[j] = best + em[t * n + j];
            }
            core::mem::swap(&mut score, &mut next);
        }
        let mut last = 0;
        for i in 1..n {
            if score[i] > score[last] {
                last = i;
            }
        }
        let mut path = vec![0usize; t_len];
        path[t_len - 1] = last;
        for t in (1..t_len).rev() {
            path[t - 1] = back[t * n + path[t]];
        }
        out.push(path);
    }
    Ok(StateSequence { tracks: out })
}

/// log of the joint density of the observations and a given state path.
/// A zero-probability transition along the path yields −∞.
pub fn complete_data_log_likelihood(
    model: &HmmSpec,
    data: &ObservationSeries,
    states: &StateSequence,
) -> Result<f64, ModelError> {
    model.check_data(data)?;
    if states.tracks.len() != data.tracks().len() {
        return Err(ModelError::StatesMismatch(format!(
            "{} state tracks for {} data tracks",
            states.tracks.len(),
            data.tracks().len()
        )));
    }
    let n = model.n_states();
    let delta = model.initial_probabilities();
    let mut total = 0.0;
    for (k, (track, path)) in data.tracks().iter().zip(&states.tracks).enumerate() {
        if path.len() != track.len() {
            return Err(ModelError::StatesMismatch(format!("track {k} length differs")));
        }
        if path.iter().any(|&s| s >= n) {
            return Err(ModelError::StatesMismatch(format!("track {k} has a state ≥ {n}")));
        }
        total += ln(delta[path[0]]);
        for t in 1..path.len() {
            total += ln(model.tpm().get(path[t - 1], path[t]));
        }
        for (t, &s) in path.iter().enumerate() {
            for c in 0..model.n_channels() {
                if let Some(x) = track.get(t, c) {
                    total += model.emission(c, s).log_pdf(x);
                }
            }
        }
    }
    Ok(total)
}

/// Draws state paths from the chain started at δ and observations from the
/// state-dependent laws, channels independent given the state.
pub fn simulate<R: RngCore + ?Sized>(
    model: &HmmSpec,
    lengths: &[usize],
    rng: &mut R,
) -> Result<(ObservationSeries, StateSequence), ModelError> {
    let c = model.n_channels();
    let mut tracks = Vec::with_capacity(lengths.len());
    let mut states = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let mut path = Vec::with_capacity(len);
        let mut values = Vec::with_capacity(len * c);
        let mut s = categorical(rng, model.initial_probabilities());
        for t in 0..len {
            if t > 0 {
                s = categorical(rng, model.tpm().row(s));
            }
            path.push(s);
            for ch in 0..c {
                values.push(Some(model.emission(ch, s).sample(rng)));
            }
        }
        tracks.push(SeriesTrack::new(c, values, None)?);
        states.push(path);
    }
    Ok((ObservationSeries::new(tracks)?, StateSequence { tracks: states }))
}

/// Forecast state weights Pr(S_t = i | x_1..x_{t−1}) for every slot of a track (T×N).
pub(crate) fn forecast_weights(model: &HmmSpec, track: &SeriesTrack) -> Vec<f64> {
    let n = model.n_states();
    let pass = forward_pass(model.initial_probabilities(), model.tpm(), model.log_emissions(track), n);
    let t_len = track.len();
    let mut weights = vec![0.0; t_len * n];
    weights[..n].copy_from_slice(model.initial_probabilities());
    for t in 1..t_len {
        let prev = &pass.filtered[(t - 1) * n..t * n];
        for j in 0..n {
            weights[t * n + j] = (0..n).map(|i| prev[i] * model.tpm().get(i, j)).sum();
        }
    }
    weights
}

/// Pr(X_t ≤ x_t | x_1..x_{t−1}) for one channel of one track.
pub fn one_step_cdf(
    model: &HmmSpec,
    data: &ObservationSeries,
    track: usize,
    t: usize,
    channel: usize,
) -> Result<f64, ModelError> {
    model.check_data(data)?;
    let tr = data.tracks().get(track).ok_or(ModelError::IndexOutOfRange("track"))?;
    if t >= tr.len() {
        return Err(ModelError::IndexOutOfRange("slot"));
    }
    if channel >= data.n_channels() {
        return Err(ModelError::IndexOutOfRange("channel"));
    }
    let x = tr.get(t, channel).ok_or(ModelError::MissingObservation { track, slot: t, channel })?;
    let n = model.n_states();
    // only the prefix matters
    let prefix_len = t.max(1);
    let prefix_values: Vec<Option<f64>> = (0..prefix_len).flat_map(|s| tr.slot(s).iter().copied()).collect();
    let prefix = SeriesTrack::new(tr.n_channels(), prefix_values, None)?;
    let weights: Vec<f64> = if t == 0 {
        model.initial_probabilities().to_vec()
    } else {
        let pass = forward_pass(model.initial_probabilities(), model.tpm(), model.log_emissions(&prefix), n);
        let prev = &pass.filtered[(t - 1) * n..t * n];
        (0..n).map(|j| (0..n).map(|i| prev[i] * model.tpm().get(i, j)).sum()).collect()
    };
    Ok(weights.iter().enumerate().map(|(i, w)| w * model.emission(channel, i).cdf(x)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn baseline() -> HmmSpec {
        HmmSpec::univariate(
            TransitionMatrix::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap(),
            vec![Distribution::gamma(0.5, 0.7).unwrap(), Distribution::gamma(4.0, 2.5).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn stationary_examples() {
        let d = stationary_distribution(&TransitionMatrix::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap()).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-15 && (d[1] - 0.5).abs() < 1e-15);
        // hand solution: 0.2 δ1 = 0.4 δ2  ->  δ = (2/3, 1/3)
        let d = stationary_distribution(&TransitionMatrix::new(vec![vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap()).unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-14 && (d[1] - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(stationary_distribution(&TransitionMatrix::identity(1)).unwrap(), vec![1.0]);
        assert_eq!(stationary_distribution(&TransitionMatrix::identity(2)), Err(ModelError::Reducible));
        // periodic but irreducible chains still have a unique stationary vector
        let d = stationary_distribution(&TransitionMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_tpm_rejected() {
        assert!(TransitionMatrix::new(vec![vec![0.9, 0.2], vec![0.1, 0.9]]).is_err());
        assert!(TransitionMatrix::new(vec![vec![1.1, -0.1], vec![0.1, 0.9]]).is_err());
        assert!(TransitionMatrix::new(vec![vec![1.0]; 2]).is_err());
    }

    #[test]
    fn one_state_likelihood_is_iid_sum() {
        let g = Distribution::gamma(1.7, 2.0).unwrap();
        let m = HmmSpec::univariate(TransitionMatrix::identity(1), vec![g.clone()]).unwrap();
        let xs = [0.3, 1.2, 4.0, 2.2];
        let data = ObservationSeries::univariate(&[xs.to_vec()]).unwrap();
        let expected: f64 = xs.iter().map(|&x| g.log_pdf(x)).sum();
        assert!((log_likelihood(&m, &data).unwrap() - expected).abs() < 1e-12);
        let path = viterbi(&m, &data).unwrap();
        assert_eq!(path.tracks[0], vec![0; 4]);
        assert_eq!(complete_data_log_likelihood(&m, &data, &path).unwrap(), log_likelihood(&m, &data).unwrap());
    }

    #[test]
    fn well_separated_decoding() {
        let m = baseline();
        let data = ObservationSeries::univariate(&[vec![0.1, 0.2, 5.0, 6.0]]).unwrap();
        assert_eq!(viterbi(&m, &data).unwrap().tracks[0], vec![0, 0, 1, 1]);
    }

    #[test]
    fn complete_data_hand_product() {
        let m = baseline();
        let xs = [0.1, 0.2, 5.0, 6.0];
        let data = ObservationSeries::univariate(&[xs.to_vec()]).unwrap();
        let path = StateSequence { tracks: vec![vec![0, 0, 1, 1]] };
        let g1 = Distribution::gamma(0.5, 0.7).unwrap();
        let g2 = Distribution::gamma(4.0, 2.5).unwrap();
        let direct = 0.5 * 0.9 * 0.1 * 0.9 * exp(g1.log_pdf(0.1)) * exp(g1.log_pdf(0.2)) * exp(g2.log_pdf(5.0)) * exp(g2.log_pdf(6.0));
        let v = complete_data_log_likelihood(&m, &data, &path).unwrap();
        assert!((v - ln(direct)).abs() < 1e-12);
        assert!(v <= log_likelihood(&m, &data).unwrap());
    }

    #[test]
    fn zero_transition_gives_negative_infinity() {
        let m = HmmSpec::new(
            TransitionMatrix::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap(),
            InitialDistribution::Fixed(vec![0.5, 0.5]),
            vec![vec![Distribution::gamma(1.0, 1.0).unwrap(), Distribution::gamma(2.0, 1.0).unwrap()]],
        )
        .unwrap();
        let data = ObservationSeries::univariate(&[vec![1.0, 1.0]]).unwrap();
        let path = StateSequence { tracks: vec![vec![0, 1]] };
        assert_eq!(complete_data_log_likelihood(&m, &data, &path).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn missing_channel_drops_only_its_factor() {
        let m = HmmSpec::new(
            TransitionMatrix::identity(1),
            InitialDistribution::Stationary,
            vec![vec![Distribution::gamma(1.0, 2.0).unwrap()], vec![Distribution::von_mises(0.0, 1.0).unwrap()]],
        )
        .unwrap();
        let track = SeriesTrack::new(2, vec![Some(1.0), None, None, None, Some(2.0), Some(0.5)], None).unwrap();
        let data = ObservationSeries::new(vec![track]).unwrap();
        let expected = m.emission(0, 0).log_pdf(1.0) + m.emission(0, 0).log_pdf(2.0) + m.emission(1, 0).log_pdf(0.5);
        assert!((log_likelihood(&m, &data).unwrap() - expected).abs() < 1e-12);
        assert_eq!(data.data_size(), 2);
    }

    #[test]
    fn simulation_frequencies() {
        let m = baseline();
        let mut rng = stream(2024);
        let (_, states) = simulate(&m, &[100_000], &mut rng).unwrap();
        let path = &states.tracks[0];
        let occ = path.iter().filter(|&&s| s == 0).count() as f64 / path.len() as f64;
        assert!((occ - 0.5).abs() < 0.01);
        let mut counts = [[0usize; 2]; 2];
        for w in path.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        for i in 0..2 {
            let row: usize = counts[i].iter().sum();
            for j in 0..2 {
                assert!((counts[i][j] as f64 / row as f64 - m.tpm().get(i, j)).abs() < 0.01);
            }
        }
    }

    #[test]
    fn absorbing_chain_stays_put() {
        let m = HmmSpec::new(
            TransitionMatrix::identity(2),
            InitialDistribution::Fixed(vec![1.0, 0.0]),
            vec![vec![Distribution::gamma(1.0, 1.0).unwrap(), Distribution::gamma(2.0, 1.0).unwrap()]],
        )
        .unwrap();
        let (_, states) = simulate(&m, &[500], &mut stream(1)).unwrap();
        assert!(states.tracks[0].iter().all(|&s| s == 0));
    }

    #[test]
    fn first_step_forecast_uses_initial_weights() {
        let m = baseline();
        let data = ObservationSeries::univariate(&[vec![1.3, 0.2, 7.0]]).unwrap();
        let v = one_step_cdf(&m, &data, 0, 0, 0).unwrap();
        let expected = 0.5 * m.emission(0, 0).cdf(1.3) + 0.5 * m.emission(0, 1).cdf(1.3);
        assert!((v - expected).abs() < 1e-15);
        let one = HmmSpec::univariate(TransitionMatrix::identity(1), vec![Distribution::gamma(2.0, 1.5).unwrap()]).unwrap();
        assert!((one_step_cdf(&one, &data, 0, 2, 0).unwrap() - one.emission(0, 0).cdf(7.0)).abs() < 1e-15);
        assert!(one_step_cdf(&m, &data, 0, 3, 0).is_err());
    }

    #[test]
    fn permutation_preserves_likelihood() {
        let m = baseline();
        let data = ObservationSeries::univariate(&[vec![0.5, 4.0, 0.3, 2.2, 9.0]]).unwrap();
        let p = m.permuted(&[1, 0]).unwrap();
        let a = log_likelihood(&m, &data).unwrap();
        let b = log_likelihood(&p, &data).unwrap();
        assert!((a - b).abs() < 1e-10 * a.abs());
        assert!(m.permuted(&[0, 0]).is_err());
    }

    #[test]
    fn serde_roundtrip_validates() {
        let m = baseline();
        let json = serde_json_like(&m);
        assert!(json.is_some());
    }

    // serde_json is not a dependency of the no_std crate; exercise the
    // TryFrom path directly instead.
    fn serde_json_like(m: &HmmSpec) -> Option<HmmSpec> {
        let raw: HmmSpecRaw = m.clone().into();
        HmmSpec::try_from(raw).ok()
    }
}
