use std::f64::consts::PI;

use hmmorder_core::dist::{Distribution, Gamma};
use hmmorder_core::fit::{count_parameters, from_working, to_working, ModelFamily};
use hmmorder_core::model::{
    complete_data_log_likelihood, log_likelihood, one_step_cdf, simulate, stationary_distribution, viterbi,
    HmmSpec, InitialDistribution, ObservationSeries, SeriesTrack, StateSequence, TransitionMatrix,
};
use hmmorder_core::movement::{steps_and_turns, Track};
use hmmorder_core::rng::stream;
use hmmorder_core::scenarios::mixture_pair;
use hmmorder_core::select::{aic, bic};
use proptest::prelude::*;
use rand::Rng;

fn random_tpm<R: Rng>(rng: &mut R, n: usize) -> TransitionMatrix {
    let rows = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    TransitionMatrix::new(rows).unwrap()
}

/// Random model with one gamma channel and optionally a von Mises channel.
fn random_model<R: Rng>(rng: &mut R, n: usize, two_channels: bool) -> HmmSpec {
    let mut channels = vec![(0..n)
        .map(|_| Distribution::gamma(rng.random_range(0.2..5.0), rng.random_range(0.5..6.0)).unwrap())
        .collect::<Vec<_>>()];
    if two_channels {
        channels.push((0..n).map(|_| Distribution::von_mises(rng.random_range(-3.0..3.0), rng.random_range(0.1..5.0)).unwrap()).collect());
    }
    HmmSpec::new(random_tpm(rng, n), InitialDistribution::Stationary, channels).unwrap()
}

fn random_data<R: Rng>(rng: &mut R, model: &HmmSpec, len: usize) -> ObservationSeries {
    let (data, _) = simulate(model, &[len], rng).unwrap();
    let c = model.n_channels();
    let mut values: Vec<Option<f64>> = data.tracks()[0].slot(0).to_vec();
    for t in 1..len {
        values.extend_from_slice(data.tracks()[0].slot(t));
    }
    // knock out a few values, keeping slot 0 of channel 0 so something is observed
    for v in values.iter_mut().skip(1) {
        if rng.random::<f64>() < 0.15 {
            *v = None;
        }
    }
    ObservationSeries::new(vec![SeriesTrack::new(c, values, None).unwrap()]).unwrap()
}

/// All state paths of length `len` over `n` states.
fn paths(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out.into_iter().flat_map(|p| (0..n).map(move |s| [p.clone(), vec![s]].concat())).collect();
    }
    out
}

/// Joint density of the first `upto` slots and a state path, from the definition.
fn joint(model: &HmmSpec, track: &SeriesTrack, path: &[usize], upto: usize) -> f64 {
    let delta = model.initial_probabilities();
    let mut p = delta[path[0]];
    for t in 0..upto {
        if t > 0 {
            p *= model.tpm().get(path[t - 1], path[t]);
        }
        for c in 0..model.n_channels() {
            if let Some(x) = track.get(t, c) {
                p *= model.emission(c, path[t]).log_pdf(x).exp();
            }
        }
    }
    p
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn forward_viterbi_and_forecasts_match_enumeration(seed in any::<u64>(), n in 1usize..=3, len in 2usize..=8, two in any::<bool>()) {
        let mut rng = stream(seed);
        let model = random_model(&mut rng, n, two);
        let data = random_data(&mut rng, &model, len);
        let track = &data.tracks()[0];
        let all = paths(n, len);

        let joints: Vec<f64> = all.iter().map(|p| joint(&model, track, p, len)).collect();
        let total: f64 = joints.iter().sum();
        prop_assert!(close(log_likelihood(&model, &data).unwrap(), total.ln(), 1e-8));

        let decoded = viterbi(&model, &data).unwrap();
        let best = (0..all.len()).fold(0, |b, i| if joints[i] > joints[b] { i } else { b });
        prop_assert_eq!(&decoded.tracks[0], &all[best]);
        let cdll = complete_data_log_likelihood(&model, &data, &decoded).unwrap();
        prop_assert!(close(cdll, joints[best].ln(), 1e-10));

        for t in 0..len {
            let Some(x) = track.get(t, 0) else { continue };
            let prefix = paths(n, t + 1);
            let (mut num, mut den) = (0.0, 0.0);
            for p in &prefix {
                // joint over slots < t, times the transition into slot t
                let w = if t == 0 {
                    model.initial_probabilities()[p[0]]
                } else {
                    joint(&model, track, p, t) * model.tpm().get(p[t - 1], p[t])
                };
                num += w * model.emission(0, p[t]).cdf(x);
                den += w;
            }
            prop_assert!((one_step_cdf(&model, &data, 0, t, 0).unwrap() - num / den).abs() < 1e-10);
        }
    }

    #[test]
    fn working_parameters_round_trip(seed in any::<u64>(), n in 1usize..=4, movement in any::<bool>()) {
        let mut rng = stream(seed);
        let tpm = random_tpm(&mut rng, n);
        let channels = if movement {
            vec![
                (0..n).map(|_| Distribution::zero_inflated_gamma(rng.random_range(0.001..0.5), rng.random_range(1.0..500.0), rng.random_range(0.1..10.0)).unwrap()).collect(),
                (0..n).map(|_| Distribution::von_mises(rng.random_range(-3.1..3.1), rng.random_range(0.01..50.0)).unwrap()).collect(),
            ]
        } else {
            vec![(0..n).map(|_| Distribution::gamma(rng.random_range(0.01..50.0), rng.random_range(0.1..30.0)).unwrap()).collect()]
        };
        let model = HmmSpec::new(tpm, InitialDistribution::Stationary, channels).unwrap();
        let w = to_working(&model).unwrap();
        prop_assert_eq!(w.len(), count_parameters(&model));
        let back = from_working(&w, &model).unwrap();
        for (a, b) in model.tpm().as_slice().iter().zip(back.tpm().as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (ca, cb) in model.channels().iter().zip(back.channels()) {
            for (da, db) in ca.iter().zip(cb) {
                for ((_, a), (_, b)) in da.parameters().iter().zip(db.parameters()) {
                    prop_assert!(close(b, *a, 1e-10));
                }
            }
        }
    }

    #[test]
    fn stationary_distribution_is_invariant(seed in any::<u64>(), n in 1usize..=6) {
        let tpm = random_tpm(&mut stream(seed), n);
        let d = stationary_distribution(&tpm).unwrap();
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 0..n {
            let v: f64 = (0..n).map(|i| d[i] * tpm.get(i, j)).sum();
            prop_assert!((v - d[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn likelihood_is_label_invariant(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = stream(seed);
        let model = random_model(&mut rng, n, true);
        let data = random_data(&mut rng, &model, 60);
        let canon = model.canonicalized();
        let a = log_likelihood(&model, &data).unwrap();
        let b = log_likelihood(&canon, &data).unwrap();
        prop_assert!(close(a, b, 1e-10));
        let means: Vec<f64> = canon.channels()[0].iter().map(Distribution::mean).collect();
        prop_assert!(means.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn bic_minus_aic_is_penalty_difference(ll in -1e6f64..0.0, p in 1usize..60, t in 2usize..100_000) {
        let diff = bic(ll, p, t) - aic(ll, p);
        let expected = p as f64 * ((t as f64).ln() - 2.0);
        prop_assert!((diff - expected).abs() <= 1e-9 * ll.abs().max(1.0));
        if t >= 8 {
            prop_assert!(bic(ll, p, t) >= aic(ll, p));
        }
    }

    #[test]
    fn rigid_motions_preserve_steps_and_turns(seed in any::<u64>(), theta in -PI..PI, dx in -1e4f64..1e4, dy in -1e4f64..1e4) {
        let mut rng = stream(seed);
        let points: Vec<Option<(f64, f64)>> = (0..60)
            .map(|_| (rng.random::<f64>() > 0.05).then(|| (rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0))))
            .collect();
        let (c, s) = (theta.cos(), theta.sin());
        let moved: Vec<Option<(f64, f64)>> = points.iter().map(|p| p.map(|(x, y)| (c * x - s * y + dx, s * x + c * y + dy))).collect();
        let a = steps_and_turns(&Track { id: "a".into(), start: 0, interval: 1, points });
        let b = steps_and_turns(&Track { id: "a".into(), start: 0, interval: 1, points: moved });
        for (u, v) in a.step.iter().zip(&b.step) {
            match (u, v) {
                (Some(u), Some(v)) => prop_assert!((u - v).abs() < 1e-10 * u.max(1.0)),
                (None, None) => {}
                _ => prop_assert!(false, "missingness changed"),
            }
        }
        for (u, v) in a.angle.iter().zip(&b.angle) {
            match (u, v) {
                (Some(u), Some(v)) => {
                    let d = (u - v).abs();
                    prop_assert!(d.min(2.0 * PI - d) < 1e-10);
                }
                (None, None) => {}
                _ => prop_assert!(false, "angle missingness changed"),
            }
        }
    }

    #[test]
    fn mixture_and_three_state_models_are_equivalent(seed in any::<u64>(), len in 2usize..=7) {
        let mut rng = stream(seed);
        let g11 = rng.random_range(0.05..0.95);
        let g22 = rng.random_range(0.05..0.95);
        let alpha = rng.random_range(0.05..0.95);
        let gammas = [0, 1, 2].map(|_| Gamma::new(rng.random_range(0.3..5.0), rng.random_range(0.5..5.0)).unwrap());
        let (two, three) = mixture_pair(g11, g22, alpha, gammas).unwrap();
        let (data, _) = simulate(&three, &[len], &mut rng).unwrap();
        let track = &data.tracks()[0];
        let l2: f64 = paths(2, len).iter().map(|p| joint(&two, track, p, len)).sum();
        let l3: f64 = paths(3, len).iter().map(|p| joint(&three, track, p, len)).sum();
        prop_assert!((l2.ln() - l3.ln()).abs() < 1e-10);
        let f2 = log_likelihood(&two, &data).unwrap();
        let f3 = log_likelihood(&three, &data).unwrap();
        prop_assert!((f2 - f3).abs() < 1e-10 * f2.abs().max(1.0));
    }

    #[test]
    fn distribution_quantiles_invert_cdfs(mean in 0.05f64..20.0, shape in 0.2f64..20.0, p in 0.001f64..0.999) {
        let g = Distribution::gamma(mean, shape).unwrap();
        let q = g.quantile(p).unwrap();
        prop_assert!((g.cdf(q) - p).abs() < 1e-9);
        let vm = Distribution::von_mises(1.0, shape).unwrap();
        let q = vm.quantile(p).unwrap();
        prop_assert!((vm.cdf(q) - p).abs() < 1e-8);
    }
}

#[test]
fn simulation_is_reproducible() {
    let m = ModelFamily::ZeroInflatedGammaVonMises.template(3);
    let a = simulate(&m, &[100, 50], &mut stream(9)).unwrap();
    let b = simulate(&m, &[100, 50], &mut stream(9)).unwrap();
    assert_eq!(a, b);
    let states: &StateSequence = &a.1;
    assert_eq!(states.tracks.iter().map(Vec::len).collect::<Vec<_>>(), vec![100, 50]);
}
