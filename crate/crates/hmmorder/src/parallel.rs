//! Multi-start fitting on a bounded rayon pool.
//!
//! Every start and every order derives its own seed from the master seed, so
//! results do not depend on the number of workers or on scheduling order.

use hmmorder_core::fit::{FitConfig, FitProblem, FitResult, ModelFamily};
use hmmorder_core::model::{HmmSpec, ObservationSeries};
use hmmorder_core::select::{order_seed, CriteriaTable};
use hmmorder_core::FitError;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs `f` on a pool of `workers` threads (0 means one per core).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Error::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Parallel counterpart of `hmmorder_core::fit::fit`; identical output.
pub fn fit_parallel(data: &ObservationSeries, template: &HmmSpec, config: &FitConfig) -> std::result::Result<FitResult, FitError> {
    let problem = FitProblem::new(data, template, config)?;
    let outcomes = (0..problem.n_starts()).into_par_iter().map(|i| problem.run_start(i)).collect();
    problem.finish(outcomes)
}

pub type OrderFits = Vec<(usize, std::result::Result<FitResult, FitError>)>;

/// Fits every order in `n_range` and tabulates AIC, BIC and ICL. Same seeds
/// as `hmmorder_core::select::criteria_table`.
pub fn criteria_table_parallel(
    data: &ObservationSeries,
    family: ModelFamily,
    n_range: &[usize],
    config: &FitConfig,
) -> Result<(CriteriaTable, OrderFits)> {
    if n_range.is_empty() || n_range.contains(&0) {
        return Err(Error::Config("n_range must be nonempty and positive".into()));
    }
    config.validate()?;
    let fits: OrderFits = n_range
        .par_iter()
        .map(|&n| {
            let cfg = FitConfig { seed: order_seed(config.seed, n), ..config.clone() };
            (n, fit_parallel(data, &family.template(n), &cfg))
        })
        .collect();
    Ok((CriteriaTable::from_fits(data, &fits), fits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hmmorder_core::scenarios::{generate, ScenarioConfig, ScenarioId};
    use hmmorder_core::select::criteria_table;

    #[test]
    fn parallel_matches_sequential() {
        let out = generate(&ScenarioConfig::new(ScenarioId::Numbered(8), 5).with_length(400)).unwrap();
        let cfg = FitConfig::with_starts(4, 11);
        let (seq, _) = criteria_table(&out.data, ModelFamily::Gamma, &[2, 3], &cfg).unwrap();
        let (par, _) = with_workers(3, || criteria_table_parallel(&out.data, ModelFamily::Gamma, &[2, 3], &cfg)).unwrap().unwrap();
        assert_eq!(seq, par);
    }
}
