//! Step-and-turn case study: tracks to a criteria table, decoded states,
//! occupancy-weighted density curves and step-length residual checks for
//! each candidate number of states.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use hmmorder_core::diagnose::{acf, ks_normal, pseudo_residuals, qq_points, white_noise_band, KsTest};
use hmmorder_core::fit::{FitConfig, FitResult, ModelFamily};
use hmmorder_core::model::{viterbi, ObservationSeries, StateSequence};
use hmmorder_core::movement::{grid, occupancy, steps_and_turns, to_observations, weighted_density_curves, Track};
use hmmorder_core::rng::{derive_seed, stream};
use hmmorder_core::select::CriteriaTable;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files::{write_json, write_text};
use crate::parallel::criteria_table_parallel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub n_range: Vec<usize>,
    pub fit: FitConfig,
    /// Largest residual autocorrelation lag reported.
    pub max_lag: usize,
    pub grid_points: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { n_range: vec![2, 3, 4, 5], fit: FitConfig { n_starts: 50, ..FitConfig::default() }, max_lag: 48, grid_points: 201 }
    }
}

/// Density samples: x, one column per state, and their sum.
pub type Curves = Vec<(f64, Vec<f64>, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub n_states: usize,
    pub fit: FitResult,
    pub decoded: StateSequence,
    pub occupancy: Vec<f64>,
    pub step_density: Curves,
    pub angle_density: Curves,
    /// Step-length pseudo-residuals per track.
    pub residuals: Vec<Vec<Option<f64>>>,
    pub qq: Vec<(f64, f64)>,
    pub acf: Vec<f64>,
    pub acf_band: f64,
    pub ks: KsTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub track_ids: Vec<String>,
    pub slots: usize,
    pub observed_slots: usize,
    pub missing_steps: usize,
    pub missing_angles: usize,
    pub criteria: CriteriaTable,
    pub orders: Vec<OrderReport>,
}

fn residual_seed(master: u64, n: usize) -> u64 {
    derive_seed(master, 2_000_000 + n as u64)
}

pub fn case_study_pipeline(tracks: &[Track], config: &PipelineConfig) -> Result<Report> {
    if tracks.is_empty() {
        return Err(Error::Config("no tracks to analyse".into()));
    }
    let moves: Vec<_> = tracks.iter().map(steps_and_turns).collect();
    let data = to_observations(&moves)?;
    let (criteria, fits) = criteria_table_parallel(&data, ModelFamily::ZeroInflatedGammaVonMises, &config.n_range, &config.fit)?;
    let steps = data.channel_values(0);
    let step_max = steps.iter().copied().fold(0.0, f64::max);
    let step_grid = grid(0.0, if step_max > 0.0 { step_max } else { 1.0 }, config.grid_points);
    let angle_grid = grid(-PI, PI, config.grid_points);
    let mut orders = Vec::new();
    for (n, res) in fits {
        let Ok(fit) = res else { continue };
        orders.push(order_report(&data, fit, n, config, &step_grid, &angle_grid)?);
    }
    Ok(Report {
        track_ids: tracks.iter().map(|t| t.id.clone()).collect(),
        slots: data.lengths().iter().sum(),
        observed_slots: data.data_size(),
        missing_steps: moves.iter().map(|m| m.step.iter().filter(|v| v.is_none()).count()).sum(),
        missing_angles: moves.iter().map(|m| m.angle.iter().filter(|v| v.is_none()).count()).sum(),
        criteria,
        orders,
    })
}

fn order_report(data: &ObservationSeries, fit: FitResult, n: usize, config: &PipelineConfig, step_grid: &[f64], angle_grid: &[f64]) -> Result<OrderReport> {
    let model = &fit.best_model;
    let decoded = viterbi(model, data)?;
    let occ = occupancy(&decoded, n);
    let z = pseudo_residuals(model, data, 0, &mut stream(residual_seed(config.fit.seed, n)))?;
    let shortest = data.lengths().into_iter().min().unwrap_or(0);
    let lags = config.max_lag.min(shortest.saturating_sub(1));
    Ok(OrderReport {
        n_states: n,
        step_density: weighted_density_curves(model, 0, &occ, step_grid),
        angle_density: weighted_density_curves(model, 1, &occ, angle_grid),
        qq: qq_points(&z)?,
        acf: acf(&z, lags)?,
        acf_band: white_noise_band(z.values().len()),
        ks: ks_normal(&z),
        residuals: z.tracks,
        occupancy: occ,
        decoded,
        fit,
    })
}

pub fn criteria_csv(t: &CriteriaTable) -> String {
    let mut s = String::from("n_states,n_params,log_lik,aic,bic,icl,complete_data_log_lik,data_size,winner\n");
    for r in &t.rows {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let won: Vec<&str> = [("AIC", t.winners.aic), ("BIC", t.winners.bic), ("ICL", t.winners.icl)]
            .iter()
            .filter(|(_, w)| *w == Some(r.n_states))
            .map(|(c, _)| *c)
            .collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.n_states,
            r.n_params,
            r.log_lik,
            r.aic,
            r.bic,
            opt(r.icl),
            opt(r.complete_data_log_lik),
            r.data_size,
            won.join(";")
        );
    }
    s
}

fn curves_csv(curves: &Curves, n: usize) -> String {
    let mut s = String::from("x");
    for k in 1..=n {
        let _ = write!(s, ",state{k}");
    }
    s.push_str(",total\n");
    for (x, per, total) in curves {
        let _ = write!(s, "{x}");
        for v in per {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{total}");
    }
    s
}

#[derive(Serialize)]
struct OrderSummary<'a> {
    n_states: usize,
    log_lik: f64,
    n_params: usize,
    converged_starts: usize,
    total_starts: usize,
    occupancy: &'a [f64],
    ks_statistic: f64,
    ks_p_value: f64,
    acf_band: f64,
    model: &'a hmmorder_core::HmmSpec,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: &'static str,
    track_ids: &'a [String],
    slots: usize,
    observed_slots: usize,
    missing_steps: usize,
    missing_angles: usize,
    criteria: &'a CriteriaTable,
    orders: Vec<OrderSummary<'a>>,
}

/// Writes the report bundle and returns the relative file names.
pub fn write_report(dir: &Path, report: &Report) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        write_text(&dir.join(&name), &text)?;
        files.push(name);
        Ok(())
    };
    put("criteria.csv".into(), criteria_csv(&report.criteria))?;
    for o in &report.orders {
        let n = o.n_states;
        let mut states = String::from("track,slot,state\n");
        for (id, path) in report.track_ids.iter().zip(&o.decoded.tracks) {
            for (t, s) in path.iter().enumerate() {
                let _ = writeln!(states, "{id},{t},{}", s + 1);
            }
        }
        put(format!("states_n{n}.csv"), states)?;
        put(format!("density_step_n{n}.csv"), curves_csv(&o.step_density, n))?;
        put(format!("density_angle_n{n}.csv"), curves_csv(&o.angle_density, n))?;
        let mut res = String::from("track,slot,residual\n");
        for (id, z) in report.track_ids.iter().zip(&o.residuals) {
            for (t, v) in z.iter().enumerate() {
                let _ = writeln!(res, "{id},{t},{}", v.map(|x| x.to_string()).unwrap_or_default());
            }
        }
        put(format!("residuals_n{n}.csv"), res)?;
        let mut qq = String::from("theoretical,sample\n");
        for (a, b) in &o.qq {
            let _ = writeln!(qq, "{a},{b}");
        }
        put(format!("qq_n{n}.csv"), qq)?;
        let mut ac = String::from("lag,acf,band\n");
        for (lag, v) in o.acf.iter().enumerate() {
            let _ = writeln!(ac, "{lag},{v},{}", o.acf_band);
        }
        put(format!("acf_n{n}.csv"), ac)?;
    }
    let summary = Summary {
        schema: "hmmorder.movement-report/1",
        track_ids: &report.track_ids,
        slots: report.slots,
        observed_slots: report.observed_slots,
        missing_steps: report.missing_steps,
        missing_angles: report.missing_angles,
        criteria: &report.criteria,
        orders: report
            .orders
            .iter()
            .map(|o| OrderSummary {
                n_states: o.n_states,
                log_lik: o.fit.log_lik,
                n_params: o.fit.n_params,
                converged_starts: o.fit.n_converged(),
                total_starts: o.fit.starts.len(),
                occupancy: &o.occupancy,
                ks_statistic: o.ks.statistic,
                ks_p_value: o.ks.p_value,
                acf_band: o.acf_band,
                model: &o.fit.best_model,
            })
            .collect(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    files.push("summary.json".into());
    Ok(files)
}

/// Three well-separated behaviours (resting, foraging, travelling) used for
/// synthetic tracks: step means 20 m, 200 m and 1 km.
pub fn synthetic_model() -> hmmorder_core::HmmSpec {
    use hmmorder_core::{Distribution, HmmSpec, InitialDistribution, TransitionMatrix};
    let tpm = TransitionMatrix::new(vec![vec![0.9, 0.05, 0.05], vec![0.05, 0.9, 0.05], vec![0.05, 0.05, 0.9]]).expect("valid");
    let steps = [(0.02, 20.0, 2.0), (0.005, 200.0, 3.0), (0.001, 1000.0, 5.0)]
        .map(|(z, m, k)| Distribution::zero_inflated_gamma(z, m, k).expect("valid"));
    let turns = [(PI, 0.5), (0.0, 1.5), (0.0, 5.0)].map(|(mu, k)| Distribution::von_mises(mu, k).expect("valid"));
    HmmSpec::new(tpm, InitialDistribution::Stationary, vec![steps.to_vec(), turns.to_vec()]).expect("valid")
}

/// Hourly tracks simulated from [`synthetic_model`], ids `sim1`, `sim2`, ...
pub fn synthetic_tracks(n_tracks: usize, points: usize, missing_fraction: f64, seed: u64) -> Result<Vec<Track>> {
    let model = synthetic_model();
    (0..n_tracks)
        .map(|i| {
            let mut rng = hmmorder_core::rng::child_stream(seed, i as u64);
            let (mut tr, _) = hmmorder_core::movement::simulate_track(&model, &format!("sim{}", i + 1), points, missing_fraction, &mut rng)?;
            tr.start = 1_577_836_800; // 2020-01-01T00:00:00Z
            Ok(tr)
        })
        .collect()
}
