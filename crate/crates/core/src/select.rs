//! Information criteria and order-selection tables.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{FitError, ModelError};
use crate::fit::{fit, FitConfig, FitResult, ModelFamily};
use crate::math::ln;
use crate::model::{complete_data_log_likelihood, viterbi, ObservationSeries};
use crate::rng::derive_seed;

pub fn aic(log_lik: f64, p: usize) -> f64 {
    -2.0 * log_lik + 2.0 * p as f64
}

pub fn bic(log_lik: f64, p: usize, t: usize) -> f64 {
    -2.0 * log_lik + p as f64 * ln(t as f64)
}

/// `None` when the complete-data log-likelihood is −∞ (a zero-probability
/// transition or emission along the decoded path).
pub fn icl(complete_data_log_lik: f64, p: usize, t: usize) -> Option<f64> {
    complete_data_log_lik.is_finite().then(|| -2.0 * complete_data_log_lik + p as f64 * ln(t as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaRow {
    pub n_states: usize,
    pub n_params: usize,
    pub log_lik: f64,
    /// Along the Viterbi path; absent when it is −∞.
    pub complete_data_log_lik: Option<f64>,
    pub aic: f64,
    pub bic: f64,
    pub icl: Option<f64>,
    pub data_size: usize,
}

impl CriteriaRow {
    pub fn new(n_states: usize, n_params: usize, log_lik: f64, complete_data_log_lik: f64, data_size: usize) -> Self {
        CriteriaRow {
            n_states,
            n_params,
            log_lik,
            complete_data_log_lik: complete_data_log_lik.is_finite().then_some(complete_data_log_lik),
            aic: aic(log_lik, n_params),
            bic: bic(log_lik, n_params, data_size),
            icl: icl(complete_data_log_lik, n_params, data_size),
            data_size,
        }
    }
}

/// Criteria for one fitted model; decodes the Viterbi path for ICL.
pub fn criteria_row(result: &FitResult, data: &ObservationSeries) -> Result<CriteriaRow, ModelError> {
    let path = viterbi(&result.best_model, data)?;
    let cdll = complete_data_log_likelihood(&result.best_model, data, &path)?;
    Ok(CriteriaRow::new(result.n_states(), result.n_params, result.log_lik, cdll, result.data_size))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Winners {
    pub aic: Option<usize>,
    pub bic: Option<usize>,
    pub icl: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
    Icl,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Aic, Criterion::Bic, Criterion::Icl];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Aic => "AIC",
            Criterion::Bic => "BIC",
            Criterion::Icl => "ICL",
        }
    }

    pub fn value(self, row: &CriteriaRow) -> Option<f64> {
        match self {
            Criterion::Aic => Some(row.aic),
            Criterion::Bic => Some(row.bic),
            Criterion::Icl => row.icl,
        }
    }
}

impl Winners {
    pub fn get(&self, c: Criterion) -> Option<usize> {
        match c {
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic,
            Criterion::Icl => self.icl,
        }
    }
}

fn argmin(rows: &[CriteriaRow], c: Criterion) -> Option<usize> {
    let mut sorted: Vec<&CriteriaRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.n_states);
    let mut best: Option<(usize, f64)> = None;
    for r in sorted {
        if let Some(v) = c.value(r) {
            // strict comparison: exact ties keep the smaller N
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((r.n_states, v));
            }
        }
    }
    best.map(|(n, _)| n)
}

/// Per-criterion argmin; rows with undefined ICL are skipped for ICL.
pub fn choose_winners(rows: &[CriteriaRow]) -> Winners {
    Winners { aic: argmin(rows, Criterion::Aic), bic: argmin(rows, Criterion::Bic), icl: argmin(rows, Criterion::Icl) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub n_states: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaTable {
    pub rows: Vec<CriteriaRow>,
    pub winners: Winners,
    pub failures: Vec<FitFailure>,
    /// Orders whose ICL is undefined and therefore excluded from its argmin.
    pub icl_undefined: Vec<usize>,
}

impl CriteriaTable {
    pub fn from_rows(mut rows: Vec<CriteriaRow>, failures: Vec<FitFailure>) -> Self {
        rows.sort_by_key(|r| r.n_states);
        let icl_undefined = rows.iter().filter(|r| r.icl.is_none()).map(|r| r.n_states).collect();
        CriteriaTable { winners: choose_winners(&rows), rows, failures, icl_undefined }
    }

    /// Builds the table from per-order fit outcomes.
    pub fn from_fits(data: &ObservationSeries, fits: &[(usize, Result<FitResult, FitError>)]) -> Self {
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        for (n, res) in fits {
            match res.as_ref().map_err(ToString::to_string).and_then(|f| criteria_row(f, data).map_err(|e| e.to_string())) {
                Ok(row) => rows.push(row),
                Err(message) => failures.push(FitFailure { n_states: *n, message }),
            }
        }
        CriteriaTable::from_rows(rows, failures)
    }

    pub fn row(&self, n_states: usize) -> Option<&CriteriaRow> {
        self.rows.iter().find(|r| r.n_states == n_states)
    }
}

/// Seed used for the fit with `n_states` states under a master seed.
pub fn order_seed(master: u64, n_states: usize) -> u64 {
    derive_seed(master, 1_000_000 + n_states as u64)
}

/// Fits each order in `n_range` and tabulates the criteria.
pub fn criteria_table(
    data: &ObservationSeries,
    family: ModelFamily,
    n_range: &[usize],
    config: &FitConfig,
) -> Result<(CriteriaTable, Vec<(usize, Result<FitResult, FitError>)>), FitError> {
    if n_range.is_empty() || n_range.contains(&0) {
        return Err(FitError::InvalidConfig(String::from("n_range must be nonempty and positive")));
    }
    let fits: Vec<(usize, Result<FitResult, FitError>)> = n_range
        .iter()
        .map(|&n| {
            let cfg = FitConfig { seed: order_seed(config.seed, n), ..config.clone() };
            (n, fit(data, &family.template(n), &cfg))
        })
        .collect();
    Ok((CriteriaTable::from_fits(data, &fits), fits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn trivial_values() {
        assert_eq!(aic(0.0, 0), 0.0);
        assert_eq!(bic(0.0, 0, 10), 0.0);
        assert_eq!(icl(f64::NEG_INFINITY, 3, 10), None);
    }

    #[test]
    fn reported_rows_share_one_sample_size() {
        // (p, AIC, BIC) of a reported movement table, one decimal. The penalty gap pins ln T per
        // row; all rows must agree within rounding, and T must fall short of
        // the number of raw fixes because of missing locations.
        let rows = [(12usize, 350199.3_f64, 350296.7_f64), (21, 345285.4, 345455.8), (32, 343404.9, 343664.6), (45, 342782.0, 343147.2)];
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (p, a, b) in rows {
            lo = lo.max((b - a - 0.1) / p as f64 + 2.0);
            hi = hi.min((b - a + 0.1) / p as f64 + 2.0);
        }
        assert!(lo <= hi, "rows disagree on T");
        let t = libm::exp(0.5 * (lo + hi));
        assert!(t < 25103.0 && t > 0.97 * 25103.0, "{t}");
        // our arithmetic reproduces the gap exactly for any T
        for (p, a, _) in rows {
            let ll = -(a - 2.0 * p as f64) / 2.0;
            let d = bic(ll, p, 24773) - aic(ll, p);
            assert!((d - p as f64 * (ln(24773.0) - 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn ties_go_to_smaller_order() {
        let rows = vec![CriteriaRow::new(3, 6, -10.0, -11.0, 100), CriteriaRow::new(2, 6, -10.0, -11.0, 100)];
        let w = choose_winners(&rows);
        assert_eq!((w.aic, w.bic, w.icl), (Some(2), Some(2), Some(2)));
    }

    #[test]
    fn undefined_icl_is_excluded() {
        let rows = vec![CriteriaRow::new(2, 6, -10.0, -50.0, 100), CriteriaRow::new(3, 12, -9.0, f64::NEG_INFINITY, 100)];
        let t = CriteriaTable::from_rows(rows, vec![]);
        assert_eq!(t.winners.icl, Some(2));
        assert_eq!(t.icl_undefined, vec![3]);
    }
}
