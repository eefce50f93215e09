//! Multi-start maximum likelihood.
//!
//! A model is mapped to an unconstrained working vector: off-diagonal
//! transition entries as multinomial logits against the diagonal, then for
//! each channel and state the emission parameters (log mean and log shape for
//! gamma, an extra logit zero mass for zero-inflated gamma, location and log
//! concentration for von Mises). Each start is a BFGS run on the negative
//! log-likelihood with an analytic gradient from scaled forward-backward
//! recursions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crate::error::StartRecord;
use crate::dist::Distribution;
use crate::error::FitError;
use crate::math::{self, bessel_i1_i0_ratio, digamma, exp, inv_logit, ln, ln_bessel_i0, ln_gamma, logit};
use crate::model::{self, HmmSpec, InitialDistribution, ObservationSeries, TransitionMatrix};
use crate::optim;
use crate::rng::{child_stream, derive_seed, Stream};

/// Natural-scale boxes. Values outside are rejected by the objective, so an
/// unbounded likelihood cannot run away along a degenerate direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParameterBounds {
    pub mean_min: f64,
    /// Upper mean bound as a multiple of the channel's largest observation.
    pub mean_max_factor: f64,
    pub shape_min: f64,
    pub shape_max: f64,
    pub concentration_min: f64,
    pub concentration_max: f64,
}

impl Default for ParameterBounds {
    fn default() -> Self {
        ParameterBounds {
            mean_min: 1e-4,
            mean_max_factor: 10.0,
            shape_min: 0.05,
            shape_max: 50.0,
            concentration_min: 1e-4,
            concentration_max: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StartSampler {
    /// Multiplicative jitter half-width applied to quantile-based means.
    pub mean_jitter: f64,
    pub shape_range: (f64, f64),
    pub diagonal_range: (f64, f64),
    pub concentration_range: (f64, f64),
    pub zero_mass_jitter: f64,
    /// Share of starts whose quantile grid is (i + 1)/N instead of
    /// (i + 0.5)/N, so the top state starts at the sample maximum and rare
    /// extreme values get a state of their own.
    pub tail_fraction: f64,
    /// Chance that a state starts transient, with its diagonal drawn from
    /// `transient_range` instead of `diagonal_range`.
    pub transient_fraction: f64,
    pub transient_range: (f64, f64),
}

impl Default for StartSampler {
    fn default() -> Self {
        StartSampler {
            mean_jitter: 0.3,
            shape_range: (0.3, 5.0),
            diagonal_range: (0.7, 0.95),
            concentration_range: (0.1, 10.0),
            zero_mass_jitter: 0.3,
            tail_fraction: 0.5,
            transient_fraction: 0.25,
            transient_range: (0.01, 0.7),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub n_starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Relative log-likelihood improvement below which a start has converged.
    pub convergence_tolerance: f64,
    pub bounds: ParameterBounds,
    pub start: StartSampler,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_starts: 25,
            seed: 0,
            max_iterations: 1000,
            convergence_tolerance: 1e-8,
            bounds: ParameterBounds::default(),
            start: StartSampler::default(),
        }
    }
}

impl FitConfig {
    pub fn with_starts(n_starts: usize, seed: u64) -> Self {
        FitConfig { n_starts, seed, ..FitConfig::default() }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let b = &self.bounds;
        let s = &self.start;
        let bad = |msg: &str| Err(FitError::InvalidConfig(String::from(msg)));
        if self.n_starts == 0 {
            return bad("n_starts must be at least 1");
        }
        if !(self.convergence_tolerance > 0.0) {
            return bad("convergence_tolerance must be positive");
        }
        if !(b.mean_min > 0.0 && b.mean_max_factor > 0.0) {
            return bad("mean bounds must be positive");
        }
        if !(0.0 < b.shape_min && b.shape_min < b.shape_max) {
            return bad("shape bounds must satisfy 0 < min < max");
        }
        if !(0.0 < b.concentration_min && b.concentration_min < b.concentration_max) {
            return bad("concentration bounds must satisfy 0 < min < max");
        }
        if !(0.0 <= s.mean_jitter && s.mean_jitter < 1.0 && 0.0 <= s.zero_mass_jitter && s.zero_mass_jitter < 1.0) {
            return bad("jitter must lie in [0, 1)");
        }
        if !((0.0..=1.0).contains(&s.tail_fraction) && (0.0..=1.0).contains(&s.transient_fraction)) {
            return bad("tail_fraction and transient_fraction must lie in [0, 1]");
        }
        let pos = |r: (f64, f64)| 0.0 < r.0 && r.0 <= r.1;
        if !(pos(s.shape_range) && pos(s.concentration_range)) {
            return bad("start ranges must be positive and ordered");
        }
        let unit = |r: (f64, f64)| 0.0 < r.0 && r.0 <= r.1 && r.1 < 1.0;
        if !(unit(s.diagonal_range) && unit(s.transient_range)) {
            return bad("diagonal ranges must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Emission families the fitter knows how to build templates for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// One channel, gamma emissions.
    Gamma,
    /// Step lengths as zero-inflated gamma, turning angles as von Mises.
    ZeroInflatedGammaVonMises,
}

impl ModelFamily {
    /// Template with placeholder parameters; only its shape matters to `fit`.
    pub fn template(self, n_states: usize) -> HmmSpec {
        let tpm = TransitionMatrix::uniform_switching(n_states, if n_states == 1 { 1.0 } else { 0.9 })
            .expect("valid placeholder matrix");
        let channels = match self {
            ModelFamily::Gamma => vec![(0..n_states).map(|_| Distribution::gamma(1.0, 1.0).unwrap()).collect()],
            ModelFamily::ZeroInflatedGammaVonMises => vec![
                (0..n_states).map(|_| Distribution::zero_inflated_gamma(0.01, 1.0, 1.0).unwrap()).collect(),
                (0..n_states).map(|_| Distribution::von_mises(0.0, 1.0).unwrap()).collect(),
            ],
        };
        HmmSpec::new(tpm, InitialDistribution::Stationary, channels).expect("valid placeholder model")
    }

    pub fn n_channels(self) -> usize {
        match self {
            ModelFamily::Gamma => 1,
            ModelFamily::ZeroInflatedGammaVonMises => 2,
        }
    }
}

/// p = N(N−1) + free emission parameters over channels and states.
pub fn count_parameters(template: &HmmSpec) -> usize {
    let n = template.n_states();
    n * (n - 1) + template.channels().iter().flatten().map(Distribution::n_free_params).sum::<usize>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Gamma,
    Zig,
    VonMises,
}

impl Kind {
    fn of(d: &Distribution) -> Result<Kind, FitError> {
        match d {
            Distribution::Gamma(_) => Ok(Kind::Gamma),
            Distribution::ZeroInflatedGamma(_) => Ok(Kind::Zig),
            Distribution::VonMises(_) => Ok(Kind::VonMises),
            other => Err(FitError::NotEstimable(other.family_name())),
        }
    }

    fn width(self) -> usize {
        match self {
            Kind::Gamma | Kind::VonMises => 2,
            Kind::Zig => 3,
        }
    }
}

/// Emission kinds per channel, checked to be uniform across states.
fn channel_kinds(template: &HmmSpec) -> Result<Vec<Kind>, FitError> {
    template
        .channels()
        .iter()
        .map(|ch| {
            let k = Kind::of(&ch[0])?;
            for d in ch {
                if Kind::of(d)? != k {
                    return Err(FitError::InvalidConfig(String::from("mixed emission families within a channel")));
                }
            }
            Ok(k)
        })
        .collect()
}

fn working_len(n: usize, kinds: &[Kind]) -> usize {
    n * (n - 1) + n * kinds.iter().map(|k| k.width()).sum::<usize>()
}

/// Unconstrained working vector of a model whose emissions are estimable.
pub fn to_working(model: &HmmSpec) -> Result<Vec<f64>, FitError> {
    let kinds = channel_kinds(model)?;
    let n = model.n_states();
    let mut w = Vec::with_capacity(working_len(n, &kinds));
    for i in 0..n {
        let diag = model.tpm().get(i, i);
        for j in 0..n {
            if j != i {
                w.push(ln(model.tpm().get(i, j) / diag));
            }
        }
    }
    for channel in model.channels() {
        for d in channel {
            match d {
                Distribution::Gamma(g) => {
                    w.push(ln(g.mean()));
                    w.push(ln(g.shape()));
                }
                Distribution::ZeroInflatedGamma(z) => {
                    w.push(logit(z.zero_mass()));
                    w.push(ln(z.gamma().mean()));
                    w.push(ln(z.gamma().shape()));
                }
                Distribution::VonMises(v) => {
                    w.push(v.location());
                    w.push(ln(v.concentration()));
                }
                _ => unreachable!("checked by channel_kinds"),
            }
        }
    }
    if let Some(pos) = w.iter().position(|v| !v.is_finite()) {
        return Err(FitError::OutOfBounds(format!("working coordinate {pos} is not finite")));
    }
    Ok(w)
}

/// Softmax rows with the diagonal as reference category.
fn tpm_from_working(w: &[f64], n: usize) -> Vec<f64> {
    let mut data = vec![0.0; n * n];
    let mut k = 0;
    for i in 0..n {
        let row = &mut data[i * n..(i + 1) * n];
        let mut m: f64 = 0.0;
        for j in 0..n {
            if j != i {
                m = m.max(w[k + j - usize::from(j > i)]);
            }
        }
        let mut s = 0.0;
        for j in 0..n {
            let eta = if j == i { 0.0 } else { w[k + j - usize::from(j > i)] };
            row[j] = exp(eta - m);
            s += row[j];
        }
        row.iter_mut().for_each(|p| *p /= s);
        k += n - 1;
    }
    data
}

/// Inverse of [`to_working`]: rebuilds a model with the template's shape.
pub fn from_working(w: &[f64], template: &HmmSpec) -> Result<HmmSpec, FitError> {
    let kinds = channel_kinds(template)?;
    let n = template.n_states();
    let expected = working_len(n, &kinds);
    if w.len() != expected {
        return Err(FitError::WorkingLength { expected, found: w.len() });
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(FitError::OutOfBounds(String::from("non-finite working coordinate")));
    }
    let tpm = TransitionMatrix::from_flat(n, tpm_from_working(w, n))?;
    let mut k = n * (n - 1);
    let mut channels = Vec::with_capacity(kinds.len());
    for kind in &kinds {
        let mut ch = Vec::with_capacity(n);
        for _ in 0..n {
            let d = match kind {
                Kind::Gamma => Distribution::gamma(exp(w[k]), exp(w[k + 1]))?,
                Kind::Zig => Distribution::zero_inflated_gamma(inv_logit(w[k]), exp(w[k + 1]), exp(w[k + 2]))?,
                Kind::VonMises => Distribution::von_mises(math::wrap_angle(w[k]), exp(w[k + 1]))?,
            };
            k += kind.width();
            ch.push(d);
        }
        channels.push(ch);
    }
    Ok(HmmSpec::new(tpm, template.init().clone(), channels)?)
}

/// Per-channel data prepared once for all starts and evaluations.
struct ChannelData {
    kind: Kind,
    /// Per track: values (NaN where missing), and log or sin/cos transforms.
    x: Vec<Vec<f64>>,
    aux1: Vec<Vec<f64>>,
    aux2: Vec<Vec<f64>>,
    /// Sorted positive values, for quantile-based starts.
    sorted: Vec<f64>,
    zero_fraction: f64,
    max_value: f64,
}

/// Working-coordinate ranges; `flag` marks the natural-scale boxes whose
/// activity at convergence is reported.
#[derive(Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
    flag: bool,
}

const ETA_GUARD: f64 = 40.0;
const LOGIT_GUARD: f64 = 25.0;
const BOUND_MARGIN: f64 = 1e-3;

/// Data, template and configuration bound together so individual starts can
/// be run independently (and concurrently) and then reduced.
pub struct FitProblem<'a> {
    data: &'a ObservationSeries,
    template: HmmSpec,
    config: FitConfig,
    kinds: Vec<Kind>,
    channels: Vec<ChannelData>,
    ranges: Vec<Range>,
    lengths: Vec<usize>,
}

impl<'a> FitProblem<'a> {
    pub fn new(data: &'a ObservationSeries, template: &HmmSpec, config: &FitConfig) -> Result<Self, FitError> {
        config.validate()?;
        if data.n_channels() != template.n_channels() {
            return Err(FitError::Model(crate::ModelError::ChannelMismatch {
                expected: template.n_channels(),
                found: data.n_channels(),
            }));
        }
        let kinds = channel_kinds(template)?;
        let mut channels = Vec::with_capacity(kinds.len());
        for (c, &kind) in kinds.iter().enumerate() {
            let mut x = Vec::new();
            let mut aux1 = Vec::new();
            let mut aux2 = Vec::new();
            let mut sorted = Vec::new();
            let mut zeros = 0usize;
            let mut present = 0usize;
            for track in data.tracks() {
                let xs: Vec<f64> = track.channel(c).map(|v| v.unwrap_or(f64::NAN)).collect();
                for &v in xs.iter().filter(|v| !v.is_nan()) {
                    present += 1;
                    if v == 0.0 {
                        zeros += 1;
                    } else {
                        sorted.push(v);
                    }
                }
                let (a1, a2): (Vec<f64>, Vec<f64>) = match kind {
                    Kind::VonMises => xs.iter().map(|&v| (libm::sin(v), libm::cos(v))).unzip(),
                    _ => xs.iter().map(|&v| (if v > 0.0 { ln(v) } else { f64::NEG_INFINITY }, 0.0)).unzip(),
                };
                x.push(xs);
                aux1.push(a1);
                aux2.push(a2);
            }
            if present == 0 {
                return Err(FitError::InvalidConfig(format!("channel {c} has no observations")));
            }
            sorted.sort_by(f64::total_cmp);
            let max_value = sorted.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
            channels.push(ChannelData {
                kind,
                x,
                aux1,
                aux2,
                sorted,
                zero_fraction: zeros as f64 / present as f64,
                max_value,
            });
        }
        let n = template.n_states();
        let b = &config.bounds;
        let mut ranges = vec![Range { lo: -ETA_GUARD, hi: ETA_GUARD, flag: false }; n * (n - 1)];
        for ch in &channels {
            let mean = Range { lo: ln(b.mean_min), hi: ln(b.mean_max_factor * ch.max_value), flag: true };
            let shape = Range { lo: ln(b.shape_min), hi: ln(b.shape_max), flag: true };
            for _ in 0..n {
                match ch.kind {
                    Kind::Gamma => ranges.extend([mean, shape]),
                    Kind::Zig => ranges.extend([Range { lo: -LOGIT_GUARD, hi: LOGIT_GUARD, flag: false }, mean, shape]),
                    Kind::VonMises => ranges.extend([
                        Range { lo: f64::NEG_INFINITY, hi: f64::INFINITY, flag: false },
                        Range { lo: ln(b.concentration_min), hi: ln(b.concentration_max), flag: true },
                    ]),
                }
            }
        }
        Ok(FitProblem {
            data,
            template: template.clone(),
            config: config.clone(),
            kinds,
            channels,
            ranges,
            lengths: data.lengths(),
        })
    }

    pub fn n_starts(&self) -> usize {
        self.config.n_starts
    }

    pub fn template(&self) -> &HmmSpec {
        &self.template
    }

    fn in_box(&self, w: &[f64]) -> bool {
        w.iter().zip(&self.ranges).all(|(v, r)| *v >= r.lo && *v <= r.hi)
    }

    fn at_bound(&self, w: &[f64]) -> bool {
        w.iter().zip(&self.ranges).any(|(v, r)| r.flag && (v - r.lo < BOUND_MARGIN || r.hi - v < BOUND_MARGIN))
    }

    /// Random start in working coordinates (always inside the box).
    pub fn sample_start(&self, rng: &mut Stream) -> Vec<f64> {
        let n = self.template.n_states();
        let s = &self.config.start;
        let mut w = Vec::with_capacity(self.ranges.len());
        for _ in 0..n {
            let range = if n > 1 && rng.random::<f64>() < s.transient_fraction { s.transient_range } else { s.diagonal_range };
            let diag: f64 = rng.random_range(range.0..=range.1);
            // off-diagonal mass split at random (flat Dirichlet)
            let split: Vec<f64> = (1..n).map(|_| -ln(1.0 - rng.random::<f64>())).collect();
            let total: f64 = split.iter().sum();
            for e in split {
                w.push(ln((1.0 - diag) * e / total / diag));
            }
        }
        let log_uniform = |rng: &mut Stream, r: (f64, f64)| exp(rng.random_range(ln(r.0)..=ln(r.1)));
        let offset = if rng.random::<f64>() < s.tail_fraction { 1.0 } else { 0.5 };
        for ch in &self.channels {
            for i in 0..n {
                let jitter = |rng: &mut Stream, h: f64| if h > 0.0 { rng.random_range(1.0 - h..1.0 + h) } else { 1.0 };
                match ch.kind {
                    Kind::Gamma | Kind::Zig => {
                        if ch.kind == Kind::Zig {
                            let p = (ch.zero_fraction.max(1e-4) * jitter(rng, s.zero_mass_jitter)).min(0.5);
                            w.push(logit(p));
                        }
                        let q = quantile_of_sorted(&ch.sorted, (i as f64 + offset) / n as f64);
                        let mean = q * jitter(rng, s.mean_jitter);
                        w.push(ln(mean));
                        w.push(ln(log_uniform(rng, s.shape_range)));
                    }
                    Kind::VonMises => {
                        w.push(rng.random_range(-PI..PI));
                        w.push(ln(log_uniform(rng, s.concentration_range)));
                    }
                }
            }
        }
        // keep starts strictly inside the box
        for (v, r) in w.iter_mut().zip(&self.ranges) {
            if r.lo.is_finite() {
                *v = v.clamp(r.lo + 2.0 * BOUND_MARGIN, r.hi - 2.0 * BOUND_MARGIN);
            }
        }
        w
    }

    /// Negative log-likelihood and its gradient, or `None` outside the box
    /// or where the likelihood vanishes.
    pub fn objective(&self, w: &[f64]) -> Option<(f64, Vec<f64>)> {
        if !self.in_box(w) {
            return None;
        }
        let n = self.template.n_states();
        let tpm_data = tpm_from_working(w, n);
        let tpm = TransitionMatrix::from_flat_unchecked(n, tpm_data);
        let stationary = matches!(self.template.init(), InitialDistribution::Stationary);
        let (delta, z) = if stationary {
            let z = math::invert(&model::fundamental_system(&tpm), n)?;
            let delta: Vec<f64> = (0..n).map(|m| (0..n).map(|i| z[i * n + m]).sum::<f64>().max(1e-300)).collect();
            (delta, z)
        } else {
            (self.template.initial_probabilities().to_vec(), Vec::new())
        };

        let params = self.decode_emissions(w, n);
        let mut loglik = 0.0;
        let mut xi = vec![0.0; n * n];
        let mut first = vec![0.0; n];
        let mut stats: Vec<Vec<[f64; 4]>> = self.channels.iter().map(|_| vec![[0.0; 4]; n]).collect();

        for (k, &t_len) in self.lengths.iter().enumerate() {
            let mut lp = vec![0.0; t_len * n];
            for (ch, par) in self.channels.iter().zip(&params) {
                add_log_emissions(ch, k, par, &mut lp, n);
            }
            let pass = model::forward_pass(&delta, &tpm, lp, n);
            if !pass.log_lik.is_finite() {
                return None;
            }
            loglik += pass.log_lik;
            // backward pass in the same scaling
            let mut beta = vec![1.0; t_len * n];
            let mut tmp = vec![0.0; n];
            for t in (0..t_len - 1).rev() {
                let c = pass.scale[t + 1];
                for j in 0..n {
                    tmp[j] = pass.em[(t + 1) * n + j] * beta[(t + 1) * n + j] / c;
                }
                for i in 0..n {
                    let a = pass.filtered[t * n + i];
                    let mut acc = 0.0;
                    for j in 0..n {
                        let v = tpm.get(i, j) * tmp[j];
                        acc += v;
                        xi[i * n + j] += a * v;
                    }
                    beta[t * n + i] = acc;
                }
            }
            for t in 0..t_len {
                for i in 0..n {
                    let u = pass.filtered[t * n + i] * beta[t * n + i];
                    if t == 0 {
                        first[i] += u;
                    }
                    for (c, ch) in self.channels.iter().enumerate() {
                        let x = ch.x[k][t];
                        if x.is_nan() {
                            continue;
                        }
                        let st = &mut stats[c][i];
                        match ch.kind {
                            Kind::Gamma | Kind::Zig => {
                                if x > 0.0 {
                                    st[0] += u;
                                    st[1] += u * x;
                                    st[2] += u * ch.aux1[k][t];
                                } else {
                                    st[3] += u;
                                }
                            }
                            Kind::VonMises => {
                                st[0] += u;
                                st[1] += u * ch.aux1[k][t];
                                st[2] += u * ch.aux2[k][t];
                            }
                        }
                    }
                }
            }
        }

        let mut grad = vec![0.0; w.len()];
        // transition logits: ξ_ik − γ_ik Σ_j ξ_ij, plus the stationary term
        let v: Vec<f64> = if stationary {
            let d: Vec<f64> = (0..n).map(|m| first[m] / delta[m]).collect();
            (0..n).map(|j| (0..n).map(|m| z[j * n + m] * d[m]).sum()).collect()
        } else {
            vec![0.0; n]
        };
        let mut idx = 0;
        for i in 0..n {
            let row_xi: f64 = xi[i * n..(i + 1) * n].iter().sum();
            let row_v: f64 = (0..n).map(|j| tpm.get(i, j) * v[j]).sum();
            for kk in 0..n {
                if kk == i {
                    continue;
                }
                let g = tpm.get(i, kk);
                grad[idx] = xi[i * n + kk] - g * row_xi + delta[i] * g * (v[kk] - row_v);
                idx += 1;
            }
        }
        for (c, ch) in self.channels.iter().enumerate() {
            for i in 0..n {
                let st = &stats[c][i];
                let p = &params[c][i];
                match ch.kind {
                    Kind::Gamma | Kind::Zig => {
                        if ch.kind == Kind::Zig {
                            grad[idx] = st[3] * (1.0 - p.zero_mass) - st[0] * p.zero_mass;
                            idx += 1;
                        }
                        let (mu, k) = (p.a, p.b);
                        grad[idx] = k * (st[1] / mu - st[0]);
                        grad[idx + 1] = k * (st[0] * (ln(k) + 1.0 - ln(mu) - digamma(k)) + st[2] - st[1] / mu);
                        idx += 2;
                    }
                    Kind::VonMises => {
                        let (loc, kappa) = (p.a, p.b);
                        let (s_loc, c_loc) = (libm::sin(loc), libm::cos(loc));
                        // Σu sin(x−μ) and Σu cos(x−μ)
                        let su = st[1] * c_loc - st[2] * s_loc;
                        let cu = st[2] * c_loc + st[1] * s_loc;
                        grad[idx] = kappa * su;
                        grad[idx + 1] = kappa * (cu - bessel_i1_i0_ratio(kappa) * st[0]);
                        idx += 2;
                    }
                }
            }
        }
        grad.iter_mut().for_each(|g| *g = -*g);
        Some((-loglik, grad))
    }

    fn decode_emissions(&self, w: &[f64], n: usize) -> Vec<Vec<EmissionParams>> {
        let mut k = n * (n - 1);
        let mut out = Vec::with_capacity(self.kinds.len());
        for kind in &self.kinds {
            let mut ch = Vec::with_capacity(n);
            for _ in 0..n {
                let p = match kind {
                    Kind::Gamma => EmissionParams::gamma(exp(w[k]), exp(w[k + 1]), 0.0),
                    Kind::Zig => EmissionParams::gamma(exp(w[k + 1]), exp(w[k + 2]), inv_logit(w[k])),
                    Kind::VonMises => {
                        let kappa = exp(w[k + 1]);
                        EmissionParams {
                            a: w[k],
                            b: kappa,
                            zero_mass: 0.0,
                            c0: -ln(2.0 * PI) - ln_bessel_i0(kappa),
                            c_pos: 0.0,
                            cos_a: libm::cos(w[k]),
                            sin_a: libm::sin(w[k]),
                        }
                    }
                };
                k += kind.width();
                ch.push(p);
            }
            out.push(ch);
        }
        out
    }

    /// Runs start `index` and records its outcome.
    pub fn run_start(&self, index: usize) -> StartOutcome {
        let seed = derive_seed(self.config.seed, index as u64);
        let mut rng = child_stream(self.config.seed, index as u64);
        let w0 = self.sample_start(&mut rng);
        let mut record = StartRecord { index, seed, converged: false, log_lik: None, at_bound: false, iterations: 0 };
        let Some(out) = optim::bfgs(
            |w| self.objective(w),
            w0,
            self.config.max_iterations,
            self.config.convergence_tolerance,
        ) else {
            return StartOutcome { record, working: None };
        };
        record.iterations = out.iterations;
        record.converged = out.converged;
        record.log_lik = Some(-out.f);
        record.at_bound = self.at_bound(&out.x);
        StartOutcome { record, working: Some(out.x) }
    }

    /// Max-reduction over start outcomes (ties go to the lowest index).
    pub fn finish(&self, mut outcomes: Vec<StartOutcome>) -> Result<FitResult, FitError> {
        outcomes.sort_by_key(|o| o.record.index);
        let mut best: Option<(usize, f64)> = None;
        for (pos, o) in outcomes.iter().enumerate() {
            if let (true, Some(ll)) = (o.record.converged, o.record.log_lik) {
                if ll.is_finite() && best.is_none_or(|(_, b)| ll > b) {
                    best = Some((pos, ll));
                }
            }
        }
        let records: Vec<StartRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
        let Some((pos, _)) = best else {
            return Err(FitError::NoConvergedStart(records));
        };
        let working = outcomes[pos].working.as_ref().expect("converged start has a solution");
        let model = from_working(working, &self.template)?.canonicalized();
        let log_lik = model::log_likelihood(&model, self.data)?;
        Ok(FitResult {
            n_params: count_parameters(&model),
            data_size: self.data.data_size(),
            best_start: outcomes[pos].record.index,
            best_model: model,
            log_lik,
            starts: records,
        })
    }
}

/// Decoded emission parameters and the per-evaluation constants of the log density.
struct EmissionParams {
    /// Mean (gamma kinds) or location (von Mises).
    a: f64,
    /// Shape or concentration.
    b: f64,
    zero_mass: f64,
    /// Constant term of the log density of positive values.
    c0: f64,
    /// ln(1 − zero_mass).
    c_pos: f64,
    cos_a: f64,
    sin_a: f64,
}

impl EmissionParams {
    fn gamma(mean: f64, shape: f64, zero_mass: f64) -> Self {
        EmissionParams {
            a: mean,
            b: shape,
            zero_mass,
            c0: shape * ln(shape / mean) - ln_gamma(shape),
            c_pos: libm::log1p(-zero_mass),
            cos_a: 0.0,
            sin_a: 0.0,
        }
    }
}

fn add_log_emissions(ch: &ChannelData, track: usize, params: &[EmissionParams], lp: &mut [f64], n: usize) {
    let xs = &ch.x[track];
    for (t, &x) in xs.iter().enumerate() {
        if x.is_nan() {
            continue;
        }
        let row = &mut lp[t * n..(t + 1) * n];
        match ch.kind {
            Kind::Gamma => {
                let lx = ch.aux1[track][t];
                for (r, p) in row.iter_mut().zip(params) {
                    *r += if x > 0.0 { p.c0 + (p.b - 1.0) * lx - p.b / p.a * x } else { f64::NEG_INFINITY };
                }
            }
            Kind::Zig => {
                let lx = ch.aux1[track][t];
                for (r, p) in row.iter_mut().zip(params) {
                    *r += if x > 0.0 { p.c_pos + p.c0 + (p.b - 1.0) * lx - p.b / p.a * x } else { ln(p.zero_mass) };
                }
            }
            Kind::VonMises => {
                let (s, c) = (ch.aux1[track][t], ch.aux2[track][t]);
                for (r, p) in row.iter_mut().zip(params) {
                    *r += p.c0 + p.b * (c * p.cos_a + s * p.sin_a);
                }
            }
        }
    }
}

fn quantile_of_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 1.0;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Result of one local optimization.
#[derive(Debug, Clone)]
pub struct StartOutcome {
    pub record: StartRecord,
    pub working: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Best model, states sorted by first-channel emission mean.
    pub best_model: HmmSpec,
    pub log_lik: f64,
    pub n_params: usize,
    pub starts: Vec<StartRecord>,
    /// Slots with at least one observed channel.
    pub data_size: usize,
    pub best_start: usize,
}

impl FitResult {
    pub fn n_states(&self) -> usize {
        self.best_model.n_states()
    }

    pub fn n_converged(&self) -> usize {
        self.starts.iter().filter(|s| s.converged).count()
    }
}

/// Sequential multi-start fit. Deterministic given data, template and seed.
pub fn fit(data: &ObservationSeries, template: &HmmSpec, config: &FitConfig) -> Result<FitResult, FitError> {
    let problem = FitProblem::new(data, template, config)?;
    let outcomes = (0..problem.n_starts()).map(|i| problem.run_start(i)).collect();
    problem.finish(outcomes)
}

/// One local optimization from a given model; used to confirm fixed points.
pub fn refine(data: &ObservationSeries, start: &HmmSpec, config: &FitConfig) -> Result<FitResult, FitError> {
    let problem = FitProblem::new(data, start, config)?;
    let w0 = to_working(start)?;
    let mut record = StartRecord { index: 0, seed: config.seed, converged: false, log_lik: None, at_bound: false, iterations: 0 };
    let working = optim::bfgs(|w| problem.objective(w), w0, config.max_iterations, config.convergence_tolerance).map(|out| {
        record.iterations = out.iterations;
        record.converged = out.converged;
        record.log_lik = Some(-out.f);
        record.at_bound = problem.at_bound(&out.x);
        out.x
    });
    problem.finish(vec![StartOutcome { record, working }])
}
