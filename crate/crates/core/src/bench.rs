//! Replication bookkeeping: per-replicate records, selection percentages
//! and estimation-bias summaries.
//!
//! The records are the unit of persistence; both tables are pure functions
//! of them, so they can be recomputed without refitting.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::FitError;
use crate::fit::{FitConfig, FitResult};
use crate::math::sqrt;
use crate::model::ObservationSeries;
use crate::rng::derive_seed;
use crate::scenarios::{ScenarioConfig, ScenarioId, ScenarioTruth};
use crate::select::{choose_winners, criteria_row, order_seed, CriteriaRow, Criterion};

/// Outcome of fitting one order to one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub scenario: ScenarioId,
    pub replicate: usize,
    pub data_seed: u64,
    pub fit_seed: u64,
    pub n_states: usize,
    /// Absent when the fit failed.
    pub criteria: Option<CriteriaRow>,
    /// First-channel emission parameters in canonical state order.
    pub means: Vec<f64>,
    pub shapes: Vec<f64>,
    pub tpm: Vec<Vec<f64>>,
    pub converged_starts: usize,
    pub total_starts: usize,
    pub best_at_bound: bool,
    pub error: Option<String>,
}

/// Seeds for replicate `r`: (data seed, fit seed).
pub fn replicate_seeds(master: u64, r: usize) -> (u64, u64) {
    let data = derive_seed(master, r as u64);
    (data, derive_seed(data, u64::MAX))
}

pub fn replicate_config(scenario: &ScenarioConfig, master: u64, r: usize) -> ScenarioConfig {
    ScenarioConfig { seed: replicate_seeds(master, r).0, ..scenario.clone() }
}

/// Fit configuration for order `n` within a replicate.
pub fn order_config(fit: &FitConfig, fit_seed: u64, n: usize) -> FitConfig {
    FitConfig { seed: order_seed(fit_seed, n), ..fit.clone() }
}

pub fn record_from_fit(
    scenario: ScenarioId,
    replicate: usize,
    seeds: (u64, u64),
    n_states: usize,
    data: &ObservationSeries,
    outcome: &Result<FitResult, FitError>,
) -> ReplicateRecord {
    let mut rec = ReplicateRecord {
        scenario,
        replicate,
        data_seed: seeds.0,
        fit_seed: seeds.1,
        n_states,
        criteria: None,
        means: Vec::new(),
        shapes: Vec::new(),
        tpm: Vec::new(),
        converged_starts: 0,
        total_starts: 0,
        best_at_bound: false,
        error: None,
    };
    match outcome {
        Ok(fit) => {
            rec.converged_starts = fit.n_converged();
            rec.total_starts = fit.starts.len();
            rec.best_at_bound = fit.starts.iter().find(|s| s.index == fit.best_start).is_some_and(|s| s.at_bound);
            rec.tpm = fit.best_model.tpm().rows();
            for d in &fit.best_model.channels()[0] {
                let (m, k) = match d {
                    Distribution::Gamma(g) => (g.mean(), g.shape()),
                    Distribution::ZeroInflatedGamma(z) => (z.gamma().mean(), z.gamma().shape()),
                    other => (other.mean(), f64::NAN),
                };
                rec.means.push(m);
                rec.shapes.push(k);
            }
            match criteria_row(fit, data) {
                Ok(row) => rec.criteria = Some(row),
                Err(e) => rec.error = Some(e.to_string()),
            }
        }
        Err(e) => {
            if let FitError::NoConvergedStart(starts) = e {
                rec.total_starts = starts.len();
            }
            rec.error = Some(e.to_string());
        }
    }
    rec
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub criterion: Criterion,
    /// Replicates choosing each order, aligned with `SelectionTable::n_range`.
    pub counts: Vec<usize>,
    pub percentages: Vec<f64>,
    /// Replicates where no order had a defined value for this criterion.
    pub undetermined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTable {
    pub n_range: Vec<usize>,
    pub rows: Vec<SelectionRow>,
    pub replicates_used: usize,
    /// Replicates dropped because at least one order failed to fit.
    pub replicates_excluded: usize,
}

impl SelectionTable {
    pub fn from_records(records: &[ReplicateRecord]) -> SelectionTable {
        let mut n_range: Vec<usize> = records.iter().map(|r| r.n_states).collect();
        n_range.sort_unstable();
        n_range.dedup();
        let mut by_rep: BTreeMap<usize, Vec<&ReplicateRecord>> = BTreeMap::new();
        for r in records {
            by_rep.entry(r.replicate).or_default().push(r);
        }
        let mut rows: Vec<SelectionRow> = Criterion::ALL
            .iter()
            .map(|&c| SelectionRow { criterion: c, counts: vec![0; n_range.len()], percentages: vec![0.0; n_range.len()], undetermined: 0 })
            .collect();
        let (mut used, mut excluded) = (0, 0);
        for recs in by_rep.values() {
            let complete: Option<Vec<CriteriaRow>> = recs.iter().map(|r| r.criteria.clone()).collect();
            let Some(crit) = complete.filter(|c| c.len() == n_range.len()) else {
                excluded += 1;
                continue;
            };
            used += 1;
            let w = choose_winners(&crit);
            for row in rows.iter_mut() {
                match w.get(row.criterion).and_then(|n| n_range.iter().position(|&m| m == n)) {
                    Some(i) => row.counts[i] += 1,
                    None => row.undetermined += 1,
                }
            }
        }
        for row in rows.iter_mut() {
            let total: usize = row.counts.iter().sum();
            if total > 0 {
                row.percentages = row.counts.iter().map(|&c| 100.0 * c as f64 / total as f64).collect();
            }
        }
        SelectionTable { n_range, rows, replicates_used: used, replicates_excluded: excluded }
    }

    pub fn row(&self, c: Criterion) -> &SelectionRow {
        self.rows.iter().find(|r| r.criterion == c).expect("all criteria present")
    }

    /// Fraction (0..1) of decided replicates where `c` picked order `n`.
    pub fn fraction(&self, c: Criterion, n: usize) -> f64 {
        let row = self.row(c);
        let total: usize = row.counts.iter().sum();
        match self.n_range.iter().position(|&m| m == n) {
            Some(i) if total > 0 => row.counts[i] as f64 / total as f64,
            _ => 0.0,
        }
    }

    /// Fraction of decided replicates where `c` picked an order of at least `n`.
    pub fn fraction_at_least(&self, c: Criterion, n: usize) -> f64 {
        self.n_range.iter().filter(|&&m| m >= n).map(|&m| self.fraction(c, m)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasEntry {
    pub n_states: usize,
    /// Zero-based state index in ascending-mean order.
    pub state: usize,
    pub parameter: String,
    pub mean: f64,
    /// Absent for a single replicate.
    pub sd: Option<f64>,
    pub count: usize,
    pub true_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTable {
    pub entries: Vec<BiasEntry>,
    /// Failed or degenerate fits left out, per order.
    pub excluded: Vec<(usize, usize)>,
}

impl BiasTable {
    pub fn get(&self, n_states: usize, state: usize, parameter: &str) -> Option<&BiasEntry> {
        self.entries.iter().find(|e| e.n_states == n_states && e.state == state && e.parameter == parameter)
    }
}

fn mean_sd(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.len() > 1).then(|| sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)));
    (m, sd)
}

/// Mean and sd of canonical (ascending-mean) estimates per order, state
/// and parameter. True values are attached when the fitted order equals the
/// number of generating states.
pub fn bias_summary(records: &[ReplicateRecord], truth: &ScenarioTruth) -> BiasTable {
    let mut orders: Vec<usize> = records.iter().map(|r| r.n_states).collect();
    orders.sort_unstable();
    orders.dedup();
    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    // truth sorted by ascending mean so states line up with canonical fits
    let mut order: Vec<usize> = (0..truth.means.len()).collect();
    order.sort_by(|&a, &b| truth.means[a].total_cmp(&truth.means[b]));
    for &n in &orders {
        let good: Vec<&ReplicateRecord> = records
            .iter()
            .filter(|r| r.n_states == n && r.error.is_none() && r.means.len() == n && r.means.iter().chain(&r.shapes).all(|v| v.is_finite()))
            .collect();
        excluded.push((n, records.iter().filter(|r| r.n_states == n).count() - good.len()));
        if good.is_empty() {
            continue;
        }
        for state in 0..n {
            for (name, pick) in [("mean", 0usize), ("shape", 1)] {
                let vals: Vec<f64> = good.iter().map(|r| if pick == 0 { r.means[state] } else { r.shapes[state] }).collect();
                let (mean, sd) = mean_sd(&vals);
                let true_value = (n == truth.means.len()).then(|| {
                    let s = order[state];
                    if pick == 0 { Some(truth.means[s]) } else { truth.shapes[s] }
                });
                entries.push(BiasEntry {
                    n_states: n,
                    state,
                    parameter: String::from(name),
                    mean,
                    sd,
                    count: vals.len(),
                    true_value: true_value.flatten(),
                });
            }
        }
    }
    BiasTable { entries, excluded }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::CriteriaRow;

    fn rec(replicate: usize, n: usize, ll: f64, means: Vec<f64>) -> ReplicateRecord {
        let p = n * n + n;
        ReplicateRecord {
            scenario: ScenarioId::Numbered(8),
            replicate,
            data_seed: 0,
            fit_seed: 0,
            n_states: n,
            criteria: Some(CriteriaRow::new(n, p, ll, ll - 10.0 * n as f64, 1000)),
            shapes: vec![1.0; means.len()],
            means,
            tpm: Vec::new(),
            converged_starts: 1,
            total_starts: 1,
            best_at_bound: false,
            error: None,
        }
    }

    #[test]
    fn selection_rows_sum_to_hundred_and_failures_are_excluded() {
        let mut records = vec![
            rec(0, 2, -100.0, vec![0.5, 4.0]),
            rec(0, 3, -90.0, vec![0.5, 2.0, 4.0]),
            rec(1, 2, -100.0, vec![0.5, 4.0]),
            rec(1, 3, -99.5, vec![0.5, 2.0, 4.0]),
        ];
        let mut failed = rec(2, 3, 0.0, vec![]);
        failed.criteria = None;
        failed.error = Some(String::from("no converged start"));
        records.push(rec(2, 2, -100.0, vec![0.5, 4.0]));
        records.push(failed);
        let t = SelectionTable::from_records(&records);
        assert_eq!(t.replicates_used, 2);
        assert_eq!(t.replicates_excluded, 1);
        for row in &t.rows {
            assert!((row.percentages.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        }
        assert_eq!(t.row(Criterion::Aic).counts, vec![1, 1]);
        assert_eq!(t.fraction(Criterion::Bic, 2), 1.0);
    }

    #[test]
    fn bias_single_replicate_has_no_sd() {
        let truth = ScenarioTruth {
            description: String::new(),
            means: vec![0.5, 4.0],
            shapes: vec![Some(0.7), Some(2.5)],
            tpm: Vec::new(),
            contaminated: Vec::new(),
            track_means: Vec::new(),
        };
        let t = bias_summary(&[rec(0, 2, -1.0, vec![0.49, 4.1])], &truth);
        let e = t.get(2, 1, "mean").unwrap();
        assert_eq!((e.mean, e.sd, e.true_value), (4.1, None, Some(4.0)));
        let t = bias_summary(&[rec(0, 2, -1.0, vec![0.49, 4.1]), rec(1, 2, -1.0, vec![0.51, 4.3])], &truth);
        assert!((t.get(2, 1, "mean").unwrap().sd.unwrap() - sqrt(0.02)).abs() < 1e-12);
    }
}
