//! Command-line front end. Each subcommand reads one TOML file, applies flag
//! overrides, writes its outputs plus `manifest.json` into the output
//! directory and prints a short summary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hmmorder_core::diagnose::{acf, ks_normal, moments, pseudo_residuals, qq_points, white_noise_band};
use hmmorder_core::fit::{FitConfig, FitResult};
use hmmorder_core::model::viterbi;
use hmmorder_core::rng::stream;
use hmmorder_core::scenarios::generate;
use hmmorder_core::HmmSpec;
use serde::Serialize;

use crate::config::{self, BenchConfig, DiagnoseConfig, FitRunConfig, MovementConfig, SelectConfig, SimulateConfig};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, summary_text, write_outputs};
use crate::files::{read_dataset, read_text, write_dataset, write_json, write_text};
use crate::manifest::Manifest;
use crate::parallel::{criteria_table_parallel, fit_parallel, with_workers};
use crate::pipeline::{case_study_pipeline, criteria_csv, synthetic_tracks, write_report, PipelineConfig};
use crate::tracks::{ingest_tracks, write_tracks, IngestOptions};

#[derive(Debug, Parser)]
#[command(name = "hmmorder", version, about = "Order selection for hidden Markov models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a data set from a simulation scenario.
    Simulate(Common),
    /// Fit one model by multi-start maximum likelihood.
    Fit(Common),
    /// Fit a range of orders and tabulate AIC, BIC and ICL.
    Select(Common),
    /// Pseudo-residuals, QQ pairs, autocorrelation and a KS test.
    Diagnose(Common),
    /// Replicated selection experiment.
    Bench(Common),
    /// Step-and-turn pipeline on telemetry tracks.
    Movement(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "hmmorder-out")]
    pub out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Suppress the summary on standard output.
    #[arg(long)]
    pub quiet: bool,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Select(_) => "select",
            Command::Diagnose(_) => "diagnose",
            Command::Bench(_) => "bench",
            Command::Movement(_) => "movement",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c) | Command::Fit(c) | Command::Select(c) | Command::Diagnose(c) | Command::Bench(c) | Command::Movement(c) => c,
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    status: &'static str,
    command: &'a str,
    kind: &'static str,
    message: String,
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Io { .. } => "io",
        Error::Parse { .. } | Error::Format { .. } => "input",
        Error::Config(_) => "config",
        Error::Model(_) | Error::Dist(_) => "model",
        Error::Fit(_) => "fit",
        Error::Scenario(_) => "scenario",
        Error::Diagnose(_) => "diagnose",
        Error::Pool(_) => "runtime",
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(summary) => {
            if !cli.command.common().quiet {
                print!("{summary}");
            }
            0
        }
        Err(e) => {
            let report = ErrorReport { status: "error", command: cli.command.name(), kind: kind(&e), message: e.to_string() };
            eprintln!("{}", serde_json::to_string(&report).expect("serializable report"));
            1
        }
    }
}

/// Runs a parsed command and returns its summary text.
pub fn run(command: &Command) -> Result<String> {
    let c = command.common();
    match command {
        Command::Simulate(_) => simulate(c),
        Command::Fit(_) => fit(c),
        Command::Select(_) => select(c),
        Command::Diagnose(_) => diagnose(c),
        Command::Bench(_) => bench(c),
        Command::Movement(_) => movement(c),
    }
}

fn fit_config(base: &FitConfig, starts: usize, seed: u64) -> FitConfig {
    FitConfig { n_starts: starts, seed, ..base.clone() }
}

fn simulate(c: &Common) -> Result<String> {
    let (mut cfg, raw): (SimulateConfig, _) = config::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let out = generate(&cfg)?;
    write_dataset(&c.out.join("dataset.csv"), &out.data, Some(&out.true_states))?;
    write_json(&c.out.join("truth.json"), &out.truth)?;
    Manifest::new("simulate", cfg.seed, &raw, &cfg).write(&c.out, &["dataset.csv".into(), "truth.json".into()])?;
    Ok(format!(
        "scenario {}: {} track(s), {} slots, seed {}\n{}\n",
        cfg.scenario,
        out.data.tracks().len(),
        out.data.lengths().iter().sum::<usize>(),
        cfg.seed,
        out.truth.description
    ))
}

fn fit(c: &Common) -> Result<String> {
    let (mut cfg, raw): (FitRunConfig, _) = config::load(&c.config)?;
    cfg.seed = c.seed.unwrap_or(cfg.seed);
    cfg.workers = c.workers.unwrap_or(cfg.workers);
    let (data, _) = read_dataset(&config::resolve(&c.config, &cfg.data))?;
    let fc = fit_config(&cfg.fit, cfg.starts, cfg.seed);
    let template = cfg.family.template(cfg.n_states);
    let result = with_workers(cfg.workers, || fit_parallel(&data, &template, &fc))??;
    let decoded = viterbi(&result.best_model, &data)?;
    write_json(&c.out.join("fit.json"), &result)?;
    write_json(&c.out.join("model.json"), &result.best_model)?;
    let mut states = String::from("track,slot,state\n");
    for (i, path) in decoded.tracks.iter().enumerate() {
        for (t, s) in path.iter().enumerate() {
            let _ = writeln!(states, "{i},{t},{}", s + 1);
        }
    }
    write_text(&c.out.join("states.csv"), &states)?;
    let mut cfg_out = cfg.clone();
    cfg_out.workers = 0;
    Manifest::new("fit", cfg.seed, &raw, &cfg_out).write(&c.out, &["fit.json".into(), "model.json".into(), "states.csv".into()])?;
    Ok(format!(
        "N={} log-likelihood {:.4}, {} parameters, {}/{} starts converged (best start {})\n",
        result.n_states(),
        result.log_lik,
        result.n_params,
        result.n_converged(),
        result.starts.len(),
        result.best_start
    ))
}

fn criteria_lines(t: &hmmorder_core::CriteriaTable) -> String {
    let mut s = format!("{:>3} {:>4} {:>14} {:>14} {:>14} {:>14}  winner\n", "N", "p", "logL", "AIC", "BIC", "ICL");
    for r in &t.rows {
        let mut won = Vec::new();
        for (name, w) in [("AIC", t.winners.aic), ("BIC", t.winners.bic), ("ICL", t.winners.icl)] {
            if w == Some(r.n_states) {
                won.push(name);
            }
        }
        let icl = r.icl.map(|v| format!("{v:.3}")).unwrap_or_else(|| "undefined".into());
        let _ = writeln!(s, "{:>3} {:>4} {:>14.3} {:>14.3} {:>14.3} {:>14}  {}", r.n_states, r.n_params, r.log_lik, r.aic, r.bic, icl, won.join(" "));
    }
    for f in &t.failures {
        let _ = writeln!(s, "{:>3} fit failed: {}", f.n_states, f.message);
    }
    s
}

fn select(c: &Common) -> Result<String> {
    let (mut cfg, raw): (SelectConfig, _) = config::load(&c.config)?;
    cfg.seed = c.seed.unwrap_or(cfg.seed);
    cfg.workers = c.workers.unwrap_or(cfg.workers);
    let (data, _) = read_dataset(&config::resolve(&c.config, &cfg.data))?;
    let fc = fit_config(&cfg.fit, cfg.starts, cfg.seed);
    let (table, fits) = with_workers(cfg.workers, || criteria_table_parallel(&data, cfg.family, &cfg.n_range, &fc))??;
    let mut files = vec!["criteria.csv".to_string(), "criteria.json".to_string()];
    write_text(&c.out.join("criteria.csv"), &criteria_csv(&table))?;
    write_json(&c.out.join("criteria.json"), &table)?;
    for (n, res) in &fits {
        if let Ok(f) = res {
            let name = format!("model_n{n}.json");
            write_json(&c.out.join(&name), &f.best_model)?;
            files.push(name);
        }
    }
    let mut cfg_out = cfg.clone();
    cfg_out.workers = 0;
    Manifest::new("select", cfg.seed, &raw, &cfg_out).write(&c.out, &files)?;
    Ok(criteria_lines(&table))
}

fn load_model(path: &Path) -> Result<HmmSpec> {
    let text = read_text(path)?;
    if let Ok(m) = serde_json::from_str::<HmmSpec>(&text) {
        return Ok(m);
    }
    serde_json::from_str::<FitResult>(&text).map(|f| f.best_model).map_err(|e| Error::format(path, format!("neither a model nor a fit result: {e}")))
}

#[derive(Serialize)]
struct Diagnostics {
    channel: usize,
    n: usize,
    mean: f64,
    variance: f64,
    ks_statistic: f64,
    ks_p_value: f64,
    acf_band: f64,
    lags_outside_band: Vec<usize>,
    clamped: usize,
}

fn diagnose(c: &Common) -> Result<String> {
    let (mut cfg, raw): (DiagnoseConfig, _) = config::load(&c.config)?;
    cfg.seed = c.seed.unwrap_or(cfg.seed);
    let (data, _) = read_dataset(&config::resolve(&c.config, &cfg.data))?;
    let model = load_model(&config::resolve(&c.config, &cfg.model))?;
    let z = pseudo_residuals(&model, &data, cfg.channel, &mut stream(cfg.seed))?;
    let shortest = data.lengths().into_iter().min().unwrap_or(0);
    let r = acf(&z, cfg.max_lag.min(shortest.saturating_sub(1)))?;
    let values = z.values();
    let band = white_noise_band(values.len());
    let ks = ks_normal(&z);
    let m = moments(&values);
    let mut res = String::from("track,slot,residual\n");
    for (i, tr) in z.tracks.iter().enumerate() {
        for (t, v) in tr.iter().enumerate() {
            let _ = writeln!(res, "{i},{t},{}", v.map(|x| x.to_string()).unwrap_or_default());
        }
    }
    let mut qq = String::from("theoretical,sample\n");
    for (a, b) in qq_points(&z)? {
        let _ = writeln!(qq, "{a},{b}");
    }
    let mut ac = String::from("lag,acf,band\n");
    for (lag, v) in r.iter().enumerate() {
        let _ = writeln!(ac, "{lag},{v},{band}");
    }
    let outside: Vec<usize> = r.iter().enumerate().skip(1).filter(|(_, v)| v.abs() > band).map(|(k, _)| k).collect();
    let d = Diagnostics {
        channel: cfg.channel,
        n: values.len(),
        mean: m.mean,
        variance: m.variance,
        ks_statistic: ks.statistic,
        ks_p_value: ks.p_value,
        acf_band: band,
        lags_outside_band: outside.clone(),
        clamped: z.clamped,
    };
    write_text(&c.out.join("residuals.csv"), &res)?;
    write_text(&c.out.join("qq.csv"), &qq)?;
    write_text(&c.out.join("acf.csv"), &ac)?;
    write_json(&c.out.join("diagnostics.json"), &d)?;
    let files = ["residuals.csv", "qq.csv", "acf.csv", "diagnostics.json"].map(String::from);
    Manifest::new("diagnose", cfg.seed, &raw, &cfg).write(&c.out, &files)?;
    Ok(format!(
        "{} residuals: mean {:.4}, variance {:.4}, KS D = {:.4} (p = {:.4}); {} of {} lags outside ±{:.4}\n",
        d.n,
        d.mean,
        d.variance,
        d.ks_statistic,
        d.ks_p_value,
        outside.len(),
        r.len() - 1,
        band
    ))
}

fn bench(c: &Common) -> Result<String> {
    let (mut plan, raw): (BenchConfig, _) = config::load(&c.config)?;
    plan.seed = c.seed.unwrap_or(plan.seed);
    plan.workers = c.workers.unwrap_or(plan.workers);
    let out = run_experiment(&plan)?;
    let files = write_outputs(&c.out, &plan, &out)?;
    let mut recorded = plan.clone();
    recorded.workers = 0;
    Manifest::new("bench", plan.seed, &raw, &recorded).write(&c.out, &files)?;
    Ok(summary_text(&plan, &out))
}

fn movement(c: &Common) -> Result<String> {
    let (mut cfg, raw): (MovementConfig, _) = config::load(&c.config)?;
    cfg.seed = c.seed.unwrap_or(cfg.seed);
    cfg.workers = c.workers.unwrap_or(cfg.workers);
    let mut files = Vec::new();
    let tracks = match (&cfg.tracks, &cfg.synthetic) {
        (Some(p), None) => ingest_tracks(&config::resolve(&c.config, p), &IngestOptions { interval: cfg.interval })?,
        (None, Some(s)) => {
            let t = synthetic_tracks(s.tracks, s.points, s.missing_fraction, cfg.seed)?;
            write_tracks(&c.out.join("tracks.csv"), &t)?;
            files.push("tracks.csv".to_string());
            t
        }
        _ => return Err(Error::Config("give exactly one of `tracks` and `[synthetic]`".into())),
    };
    let pc = PipelineConfig {
        n_range: cfg.n_range.clone(),
        fit: fit_config(&cfg.fit, cfg.starts, cfg.seed),
        max_lag: cfg.max_lag,
        ..PipelineConfig::default()
    };
    let report = with_workers(cfg.workers, || case_study_pipeline(&tracks, &pc))??;
    files.extend(write_report(&c.out, &report)?);
    let mut cfg_out = cfg.clone();
    cfg_out.workers = 0;
    Manifest::new("movement", cfg.seed, &raw, &cfg_out).write(&c.out, &files)?;
    let mut s = format!(
        "{} track(s), {} slots ({} missing steps, {} missing angles)\n",
        report.track_ids.len(),
        report.slots,
        report.missing_steps,
        report.missing_angles
    );
    s.push_str(&criteria_lines(&report.criteria));
    Ok(s)
}
