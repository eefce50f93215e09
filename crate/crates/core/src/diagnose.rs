//! Forecast pseudo-residuals and their summaries.
//!
//! The residual at slot t is Φ⁻¹ of the one-step-ahead forecast cdf at the
//! observation. At a point mass (the zero atom of a zero-inflated gamma) the
//! uniform value is drawn on [F(x⁻), F(x)], which keeps residuals exactly
//! normal under the true model.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{DiagnoseError, ModelError};
use crate::math::{exp, normal_cdf, normal_quantile, sqrt};
use crate::model::{forecast_weights, HmmSpec, ObservationSeries};

const CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub tracks: Vec<Vec<Option<f64>>>,
    /// Forecast cdf values that had to be clamped away from 0 or 1.
    pub clamped: usize,
}

impl ResidualSeries {
    pub fn values(&self) -> Vec<f64> {
        self.tracks.iter().flatten().flatten().copied().collect()
    }
}

/// Pseudo-residuals of one channel. `rng` is only consumed at point masses.
pub fn pseudo_residuals<R: RngCore + ?Sized>(
    model: &HmmSpec,
    data: &ObservationSeries,
    channel: usize,
    rng: &mut R,
) -> Result<ResidualSeries, ModelError> {
    if data.n_channels() != model.n_channels() {
        return Err(ModelError::ChannelMismatch { expected: model.n_channels(), found: data.n_channels() });
    }
    if channel >= data.n_channels() {
        return Err(ModelError::IndexOutOfRange("channel"));
    }
    let n = model.n_states();
    let emissions = &model.channels()[channel];
    let mut clamped = 0;
    let mut tracks = Vec::with_capacity(data.tracks().len());
    for track in data.tracks() {
        let weights = forecast_weights(model, track);
        let mut z = Vec::with_capacity(track.len());
        for t in 0..track.len() {
            let Some(x) = track.get(t, channel) else {
                z.push(None);
                continue;
            };
            let w = &weights[t * n..(t + 1) * n];
            let hi: f64 = w.iter().zip(emissions).map(|(w, d)| w * d.cdf(x)).sum();
            let lo: f64 = w.iter().zip(emissions).map(|(w, d)| w * d.cdf_left(x)).sum();
            let mut u = if hi > lo { lo + (hi - lo) * rng.random::<f64>() } else { hi };
            if !(CLAMP..=1.0 - CLAMP).contains(&u) {
                clamped += 1;
                u = u.clamp(CLAMP, 1.0 - CLAMP);
            }
            z.push(Some(normal_quantile(u)));
        }
        tracks.push(z);
    }
    Ok(ResidualSeries { tracks, clamped })
}

/// Pooled sample autocorrelation for lags 0..=max_lag. Pairs with a missing
/// member are skipped; the pooled mean and variance use all present values.
pub fn acf(z: &ResidualSeries, max_lag: usize) -> Result<Vec<f64>, DiagnoseError> {
    let values = z.values();
    if values.len() < 2 {
        return Err(DiagnoseError::TooFewValues { needed: 2, found: values.len() });
    }
    let shortest = z.tracks.iter().map(Vec::len).min().unwrap_or(0);
    if max_lag >= shortest {
        return Err(DiagnoseError::LagTooLarge { max_lag, shortest_track: shortest });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    if !(var > 0.0) {
        return Err(DiagnoseError::TooFewValues { needed: 2, found: 1 });
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for lag in 1..=max_lag {
        let mut acc = 0.0;
        for track in &z.tracks {
            for t in lag..track.len() {
                if let (Some(a), Some(b)) = (track[t - lag], track[t]) {
                    acc += (a - mean) * (b - mean);
                }
            }
        }
        out.push(acc / var);
    }
    Ok(out)
}

/// Approximate 3-sigma band for the sample autocorrelation of white noise.
pub fn white_noise_band(n: usize) -> f64 {
    3.0 / sqrt(n as f64)
}

/// (theoretical normal quantile, sorted residual) at positions (i − 0.5)/n.
pub fn qq_points(z: &ResidualSeries) -> Result<Vec<(f64, f64)>, DiagnoseError> {
    let mut values = z.values();
    if values.len() < 2 {
        return Err(DiagnoseError::TooFewValues { needed: 2, found: values.len() });
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    Ok(values.into_iter().enumerate().map(|(i, v)| (normal_quantile((i as f64 + 0.5) / n), v)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Kolmogorov–Smirnov distance between a sample and a continuous cdf.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    d
}

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = sqrt(n as f64);
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = exp(-2.0 * kf * kf * lambda * lambda);
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn ks_test<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> KsTest {
    let statistic = ks_statistic(values, cdf);
    KsTest { statistic, p_value: ks_p_value(statistic, values.len()), n: values.len() }
}

/// KS test of residuals against the standard normal.
pub fn ks_normal(z: &ResidualSeries) -> KsTest {
    ks_test(&z.values(), normal_cdf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

pub fn moments(values: &[f64]) -> Moments {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Moments { mean, variance }
}
