//! Replicated simulation experiments: generate R data sets from a scenario,
//! fit every order in the range, and tabulate selections and estimates.
//!
//! One raw record per (replicate, order) is the unit of persistence; the
//! selection and bias tables are recomputed from those records alone.

use std::fmt::Write as _;
use std::path::Path;

use hmmorder_core::bench::{
    bias_summary, order_config, record_from_fit, replicate_config, replicate_seeds, BiasTable, ReplicateRecord,
    SelectionTable,
};
use hmmorder_core::fit::{FitConfig, ModelFamily};
use hmmorder_core::scenarios::{generate, Knobs, ScenarioConfig, ScenarioId, ScenarioTruth};
use hmmorder_core::select::Criterion;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files::{read_ndjson, write_json, write_ndjson, write_text};
use crate::parallel::{fit_parallel, with_workers};

/// Declarative description of one experiment. Omitted fields take the
/// published protocol: 100 replicates, 150 starts, orders 2..5 (2..4 for
/// the three-state appendix scenarios).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub scenario: ScenarioId,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Slots per track (scenario default when absent).
    #[serde(default)]
    pub length: Option<usize>,
    #[serde(default)]
    pub tracks: Option<usize>,
    #[serde(default)]
    pub n_range: Option<Vec<usize>>,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub knobs: Knobs,
    /// Optimizer settings; `n_starts` and `seed` here are ignored.
    #[serde(default)]
    pub fit: FitConfig,
}

fn default_replicates() -> usize {
    100
}

fn default_starts() -> usize {
    150
}

impl ExperimentPlan {
    pub fn new(scenario: ScenarioId, replicates: usize, starts: usize, seed: u64) -> Self {
        ExperimentPlan {
            scenario,
            replicates,
            length: None,
            tracks: None,
            n_range: None,
            starts,
            seed,
            workers: 0,
            knobs: Knobs::default(),
            fit: FitConfig::default(),
        }
    }

    pub fn resolved_n_range(&self) -> Vec<usize> {
        self.n_range.clone().unwrap_or_else(|| if self.scenario.true_n_states() == 3 { vec![2, 3, 4] } else { vec![2, 3, 4, 5] })
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig { scenario: self.scenario, length: self.length, tracks: self.tracks, seed: self.seed, knobs: self.knobs.clone() }
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig { n_starts: self.starts, seed: 0, ..self.fit.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        let range = self.resolved_n_range();
        if range.is_empty() || range.contains(&0) {
            return Err(Error::Config("n_range must be nonempty and positive".into()));
        }
        if range.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_range must be strictly increasing".into()));
        }
        self.fit_config().validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub selection: SelectionTable,
    pub bias: BiasTable,
    pub records: Vec<ReplicateRecord>,
    pub truth: ScenarioTruth,
}

/// Runs the plan on `plan.workers` threads. Deterministic given the plan.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    plan.validate()?;
    with_workers(plan.workers, || run_in_pool(plan))?
}

fn run_in_pool(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    let scenario = plan.scenario_config();
    let fit = plan.fit_config();
    let range = plan.resolved_n_range();
    let truth = generate(&replicate_config(&scenario, plan.seed, 0))?.truth;
    let per_rep: Vec<Result<Vec<ReplicateRecord>>> = (0..plan.replicates)
        .into_par_iter()
        .map(|r| {
            let seeds = replicate_seeds(plan.seed, r);
            let out = generate(&replicate_config(&scenario, plan.seed, r))?;
            Ok(range
                .par_iter()
                .map(|&n| {
                    let cfg = order_config(&fit, seeds.1, n);
                    let res = fit_parallel(&out.data, &ModelFamily::Gamma.template(n), &cfg);
                    record_from_fit(plan.scenario, r, seeds, n, &out.data, &res)
                })
                .collect())
        })
        .collect();
    let mut records = Vec::with_capacity(plan.replicates * range.len());
    for r in per_rep {
        records.extend(r?);
    }
    Ok(tables_from_records(records, truth))
}

pub fn tables_from_records(records: Vec<ReplicateRecord>, truth: ScenarioTruth) -> ExperimentOutput {
    ExperimentOutput { selection: SelectionTable::from_records(&records), bias: bias_summary(&records, &truth), records, truth }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Wide selection table: one row per criterion, one percentage column per order.
pub fn selection_csv(t: &SelectionTable) -> String {
    let mut s = String::from("criterion");
    for n in &t.n_range {
        let _ = write!(s, ",N{n}");
    }
    s.push_str(",undetermined,replicates_used,replicates_excluded\n");
    for row in &t.rows {
        s.push_str(row.criterion.name());
        for p in &row.percentages {
            let _ = write!(s, ",{p:.2}");
        }
        let _ = writeln!(s, ",{},{},{}", row.undetermined, t.replicates_used, t.replicates_excluded);
    }
    s
}

/// Long bias table; states are numbered from 1 in ascending-mean order.
pub fn bias_csv(t: &BiasTable) -> String {
    let mut s = String::from("n_states,state,parameter,mean,sd,count,true_value\n");
    for e in &t.entries {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", e.n_states, e.state + 1, e.parameter, e.mean, opt(e.sd), e.count, opt(e.true_value));
    }
    s
}

pub fn summary_text(plan: &ExperimentPlan, out: &ExperimentOutput) -> String {
    let t = &out.selection;
    let mut s = String::new();
    let _ = writeln!(s, "scenario {}: {}", plan.scenario, out.truth.description);
    let _ = writeln!(
        s,
        "replicates {} (used {}, excluded {}), starts {}, orders {:?}, seed {}",
        plan.replicates, t.replicates_used, t.replicates_excluded, plan.starts, t.n_range, plan.seed
    );
    s.push_str("\npercent of replicates selecting each order\n");
    let _ = write!(s, "{:<10}", "");
    for n in &t.n_range {
        let _ = write!(s, "{:>8}", format!("N={n}"));
    }
    s.push('\n');
    for c in Criterion::ALL {
        let row = t.row(c);
        let _ = write!(s, "{:<10}", c.name());
        for p in &row.percentages {
            let _ = write!(s, "{p:>8.1}");
        }
        if row.undetermined > 0 {
            let _ = write!(s, "   ({} undetermined)", row.undetermined);
        }
        s.push('\n');
    }
    s.push_str("\nestimates: mean (sd) [true]\n");
    for e in &out.bias.entries {
        let sd = e.sd.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        let tv = e.true_value.map(|v| format!(" [{v}]")).unwrap_or_default();
        let _ = writeln!(s, "  N={} state {} {:<5} {:.3} ({sd}){tv}", e.n_states, e.state + 1, e.parameter, e.mean);
    }
    for (n, k) in &out.bias.excluded {
        if *k > 0 {
            let _ = writeln!(s, "  N={n}: {k} fits excluded");
        }
    }
    s
}

pub const RECORDS_FILE: &str = "records.ndjson";

/// Writes selection.csv, bias.csv, summary.txt, truth.json and the raw
/// records into `dir`. Returns the file names written.
pub fn write_outputs(dir: &Path, plan: &ExperimentPlan, out: &ExperimentOutput) -> Result<Vec<String>> {
    write_text(&dir.join("selection.csv"), &selection_csv(&out.selection))?;
    write_text(&dir.join("bias.csv"), &bias_csv(&out.bias))?;
    write_text(&dir.join("summary.txt"), &summary_text(plan, out))?;
    write_json(&dir.join("truth.json"), &out.truth)?;
    write_ndjson(&dir.join(RECORDS_FILE), &out.records)?;
    Ok(["selection.csv", "bias.csv", "summary.txt", "truth.json", RECORDS_FILE].map(String::from).to_vec())
}

/// Recomputes both tables from a directory written by [`write_outputs`].
pub fn reload_outputs(dir: &Path) -> Result<ExperimentOutput> {
    let records = read_ndjson(&dir.join(RECORDS_FILE))?;
    let truth = crate::files::read_json(&dir.join("truth.json"))?;
    Ok(tables_from_records(records, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_defaults_follow_protocol() {
        let p: ExperimentPlan = toml::from_str("scenario = 9").unwrap();
        assert_eq!((p.replicates, p.starts), (100, 150));
        assert_eq!(p.resolved_n_range(), vec![2, 3, 4]);
        let p: ExperimentPlan = toml::from_str("scenario = \"baseline\"\nn_range = [2, 3]").unwrap();
        assert_eq!(p.resolved_n_range(), vec![2, 3]);
        assert!(toml::from_str::<ExperimentPlan>("scenario = 1\nbogus = 2").is_err());
        let mut p = ExperimentPlan::new(ScenarioId::Numbered(8), 0, 5, 1);
        assert!(p.validate().is_err());
        p.replicates = 1;
        p.n_range = Some(vec![3, 2]);
        assert!(p.validate().is_err());
    }
}
