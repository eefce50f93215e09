//! Movement-track geometry: locations to step lengths and turning angles.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::ModelError;
use crate::math::{exp, wrap_angle};
use crate::model::{HmmSpec, ObservationSeries, SeriesTrack, StateSequence};
use crate::rng::categorical;

/// Regularly sampled planar track; `None` marks a missing fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: String,
    /// Seconds since the Unix epoch of the first slot.
    pub start: i64,
    /// Sampling interval in seconds.
    pub interval: i64,
    pub points: Vec<Option<(f64, f64)>>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn timestamp(&self, slot: usize) -> i64 {
        self.start + self.interval * slot as i64
    }

    pub fn missing(&self) -> usize {
        self.points.iter().filter(|p| p.is_none()).count()
    }
}

/// Step length and turning angle per slot. Slot t holds the step from
/// location t to t + 1 and the turn made at location t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveSeries {
    pub step: Vec<Option<f64>>,
    pub angle: Vec<Option<f64>>,
}

impl MoveSeries {
    pub fn len(&self) -> usize {
        self.step.len()
    }

    pub fn is_empty(&self) -> bool {
        self.step.is_empty()
    }
}

/// Euclidean steps and counterclockwise-positive turning angles in (−π, π].
/// Angles are missing where a neighbouring fix is missing or an adjacent
/// step has length zero.
pub fn steps_and_turns(track: &Track) -> MoveSeries {
    let p = &track.points;
    let slots = p.len().saturating_sub(1);
    let mut step = Vec::with_capacity(slots);
    let mut angle = Vec::with_capacity(slots);
    for t in 0..slots {
        let d2 = match (p[t], p[t + 1]) {
            (Some(a), Some(b)) => Some((b.0 - a.0, b.1 - a.1)),
            _ => None,
        };
        step.push(d2.map(|(dx, dy)| libm::hypot(dx, dy)));
        let d1 = if t == 0 {
            None
        } else {
            match (p[t - 1], p[t]) {
                (Some(a), Some(b)) => Some((b.0 - a.0, b.1 - a.1)),
                _ => None,
            }
        };
        angle.push(match (d1, d2) {
            (Some(u), Some(v)) if (u.0 != 0.0 || u.1 != 0.0) && (v.0 != 0.0 || v.1 != 0.0) => {
                let cross = u.0 * v.1 - u.1 * v.0;
                let dot = u.0 * v.0 + u.1 * v.1;
                Some(wrap_angle(libm::atan2(cross, dot)))
            }
            _ => None,
        });
    }
    MoveSeries { step, angle }
}

/// Two-channel observations (step, angle), one track per series.
pub fn to_observations(series: &[MoveSeries]) -> Result<ObservationSeries, ModelError> {
    let tracks = series
        .iter()
        .map(|s| SeriesTrack::new(2, s.step.iter().zip(&s.angle).flat_map(|(a, b)| [*a, *b]).collect(), None))
        .collect::<Result<Vec<_>, _>>()?;
    ObservationSeries::new(tracks)
}

/// Simulates a track of `n_points` fixes from a step/turn HMM (channel 0
/// step lengths, channel 1 turning angles). Each fix is then dropped with
/// probability `missing_fraction`. Returns the track and the slot states.
pub fn simulate_track<R: RngCore + ?Sized>(
    model: &HmmSpec,
    id: &str,
    n_points: usize,
    missing_fraction: f64,
    rng: &mut R,
) -> Result<(Track, Vec<usize>), ModelError> {
    if model.n_channels() != 2 {
        return Err(ModelError::ChannelMismatch { expected: 2, found: model.n_channels() });
    }
    if n_points < 3 {
        return Err(ModelError::TrackTooShort { track: 0, len: n_points });
    }
    let mut heading = rng.random_range(-PI..PI);
    let mut pos = (0.0, 0.0);
    let mut points = Vec::with_capacity(n_points);
    points.push(Some(pos));
    let mut states = Vec::with_capacity(n_points - 1);
    let mut s = categorical(rng, model.initial_probabilities());
    for t in 0..n_points - 1 {
        if t > 0 {
            s = categorical(rng, model.tpm().row(s));
        }
        states.push(s);
        let len = model.emission(0, s).sample(rng);
        let turn = model.emission(1, s).sample(rng);
        if t > 0 {
            heading = wrap_angle(heading + turn);
        }
        pos = (pos.0 + len * libm::cos(heading), pos.1 + len * libm::sin(heading));
        points.push(Some(pos));
    }
    if missing_fraction > 0.0 {
        for p in points.iter_mut() {
            if rng.random::<f64>() < missing_fraction {
                *p = None;
            }
        }
    }
    Ok((Track { id: String::from(id), start: 0, interval: 3600, points }, states))
}

/// Fraction of decoded slots in each state.
pub fn occupancy(states: &StateSequence, n_states: usize) -> Vec<f64> {
    states.occupancy(n_states)
}

/// One row per grid point: the state densities weighted by occupancy and
/// their sum. Point masses are not drawn; the continuous part is scaled by
/// its own mass, so a zero-inflated state integrates to (1 − zero mass).
pub fn weighted_density_curves(model: &HmmSpec, channel: usize, weights: &[f64], grid: &[f64]) -> Vec<(f64, Vec<f64>, f64)> {
    let emissions = &model.channels()[channel];
    grid.iter()
        .map(|&x| {
            let per: Vec<f64> = emissions
                .iter()
                .zip(weights)
                .map(|(d, w)| {
                    let v = match d {
                        Distribution::ZeroInflatedGamma(z) if x == 0.0 => z.gamma().log_pdf(x) + libm::log1p(-z.zero_mass()),
                        _ => d.log_pdf(x),
                    };
                    w * exp(v)
                })
                .collect();
            let total = per.iter().sum();
            (x, per, total)
        })
        .collect()
}

/// Evenly spaced grid with `n` points on [lo, hi].
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return alloc::vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Mean step length of a series (present values only).
pub fn mean_step(series: &MoveSeries) -> Option<f64> {
    let v: Vec<f64> = series.step.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use alloc::vec;

    fn track(points: Vec<Option<(f64, f64)>>) -> Track {
        Track { id: String::from("a"), start: 0, interval: 3600, points }
    }

    #[test]
    fn collinear_and_right_angle() {
        let s = steps_and_turns(&track(vec![Some((0.0, 0.0)), Some((1.0, 0.0)), Some((2.0, 0.0))]));
        assert_eq!(s.step, vec![Some(1.0), Some(1.0)]);
        assert_eq!(s.angle, vec![None, Some(0.0)]);
        let s = steps_and_turns(&track(vec![Some((0.0, 0.0)), Some((1.0, 0.0)), Some((1.0, 1.0))]));
        assert!((s.angle[1].unwrap() - PI / 2.0).abs() < 1e-15);
        // reversal maps to +π, never −π
        let s = steps_and_turns(&track(vec![Some((0.0, 0.0)), Some((1.0, 0.0)), Some((0.0, -0.0))]));
        assert_eq!(s.angle[1], Some(PI));
    }

    #[test]
    fn zero_steps_and_gaps_make_angles_missing() {
        let s = steps_and_turns(&track(vec![Some((0.0, 0.0)), Some((0.0, 0.0)), Some((1.0, 0.0)), None, Some((3.0, 0.0)), Some((4.0, 1.0))]));
        assert_eq!(s.step[0], Some(0.0));
        assert_eq!(s.angle[1], None);
        assert_eq!(s.step[2], None);
        assert_eq!(s.angle[2], None);
        assert_eq!(s.angle[3], None);
        assert_eq!(s.angle[4], None);
    }

    #[test]
    fn random_walk_matches_complex_argument() {
        let mut rng = stream(6);
        let pts: Vec<Option<(f64, f64)>> = (0..100).map(|_| Some((rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)))).collect();
        let s = steps_and_turns(&track(pts.clone()));
        for t in 1..99 {
            let (a, b, c) = (pts[t - 1].unwrap(), pts[t].unwrap(), pts[t + 1].unwrap());
            // arg((z3 − z2) / (z2 − z1)) via the complex quotient
            let (ur, ui) = (b.0 - a.0, b.1 - a.1);
            let (vr, vi) = (c.0 - b.0, c.1 - b.1);
            let den = ur * ur + ui * ui;
            let (qr, qi) = ((vr * ur + vi * ui) / den, (vi * ur - vr * ui) / den);
            assert!((s.angle[t].unwrap() - libm::atan2(qi, qr)).abs() < 1e-12);
        }
    }

    #[test]
    fn simulated_track_shape() {
        let m = crate::fit::ModelFamily::ZeroInflatedGammaVonMises.template(2);
        let (tr, states) = simulate_track(&m, "x", 200, 0.01, &mut stream(3)).unwrap();
        assert_eq!(tr.len(), 200);
        assert_eq!(states.len(), 199);
        let obs = to_observations(&[steps_and_turns(&tr)]).unwrap();
        assert_eq!(obs.lengths(), vec![199]);
    }
}
