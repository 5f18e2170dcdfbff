//! Seeded Monte Carlo harness: recovery and noise-level statistics for the
//! known-variance LASSO and both self-tuning estimators on paired trials.
//!
//! Every random draw is a pure function of `master_seed` and the trial index,
//! and all estimators within a trial see the same `(X, beta, z)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasso::{
    eval_path, homotopy_path_with, solve_lasso, LassoPath, PathConfig, SolverConfig, SparseVector,
};
use crate::model::{DesignMatrix, GroundTruth, Observation};
use crate::rng::{derive_seed, GENERATOR_NAME};
use crate::strategy_a::{tune_fixed_point, tune_path_exact_a_on, FixedPointConfig};
use crate::strategy_b::{tune_newton_on, tune_path_exact_b_on, NewtonConfig};
use crate::tuned::{Backend, TunedEstimate};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Seed streams for [`derive_seed`]: trial seeds are derived from the master
/// seed, and the design, truth and noise seeds from a trial seed.
pub const STREAM_TRIAL: u64 = 0;
pub const STREAM_DESIGN: u64 = 1;
pub const STREAM_TRUTH: u64 = 2;
pub const STREAM_NOISE: u64 = 3;

/// Solver used for the variance-proportional strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodA {
    /// Fixed-point iteration, falling back to the exact root if it stalls.
    #[default]
    FixedPoint,
    PathExact,
}

/// Solver used for the penalty/fidelity strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodB {
    #[default]
    PathExact,
    Newton,
}

fn default_known_factor() -> f64 {
    2.0
}

/// One estimator compared in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    /// LASSO with `lambda = factor * sigma * sqrt(2 log p)` and the true `sigma`.
    LassoKnown {
        #[serde(default = "default_known_factor")]
        factor: f64,
    },
    StrategyA {
        cvar: f64,
        #[serde(default)]
        method: MethodA,
    },
    StrategyB {
        c: f64,
        #[serde(default)]
        method: MethodB,
    },
}

impl EstimatorSpec {
    /// Column-safe name, e.g. `strategy_b_c0.1`.
    pub fn label(&self) -> String {
        match self {
            Self::LassoKnown { factor } if *factor == 2.0 => "lasso_known".to_string(),
            Self::LassoKnown { factor } => format!("lasso_known_f{factor}"),
            Self::StrategyA { cvar, .. } => format!("strategy_a_cvar{cvar}"),
            Self::StrategyB { c, .. } => format!("strategy_b_c{c}"),
        }
    }

    fn validate(&self, key: &str) -> Result<()> {
        let (name, v) = match self {
            Self::LassoKnown { factor } => ("factor", *factor),
            Self::StrategyA { cvar, .. } => ("cvar", *cvar),
            Self::StrategyB { c, .. } => ("c", *c),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{key}.{name}: must be positive, got {v}"
            )));
        }
        Ok(())
    }
}

/// Whether the design is redrawn for every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMode {
    #[default]
    FreshPerTrial,
    Fixed,
}

fn default_path_floor() -> f64 {
    crate::tuned::PATH_FLOOR
}

fn default_true() -> bool {
    true
}

/// Full description of a Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    pub n: usize,
    pub s: usize,
    /// Mean magnitude `B` of the nonzero coefficients.
    #[serde(alias = "B")]
    pub magnitude: f64,
    pub sigma: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub design_mode: DesignMode,
    /// Homotopy paths stop at `path_floor * tau`.
    #[serde(default = "default_path_floor")]
    pub path_floor: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Record per-estimator wall time; disable for byte-identical reruns.
    #[serde(default = "default_true")]
    pub record_timing: bool,
}

impl ExperimentConfig {
    /// Configuration of the published simulations at level `B`.
    pub fn reference_setup(magnitude: f64, trials: usize, master_seed: u64) -> Self {
        Self {
            p: 600,
            n: 75,
            s: 9,
            magnitude,
            sigma: 1.0,
            trials,
            master_seed,
            estimators: vec![
                EstimatorSpec::LassoKnown { factor: 2.0 },
                EstimatorSpec::StrategyA {
                    cvar: 8.0,
                    method: MethodA::FixedPoint,
                },
                EstimatorSpec::StrategyB {
                    c: 0.1,
                    method: MethodB::PathExact,
                },
            ],
            design_mode: DesignMode::FreshPerTrial,
            path_floor: default_path_floor(),
            solver: SolverConfig::default(),
            record_timing: true,
        }
    }

    /// Parses JSON, or TOML when the text is not a JSON object.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::InvalidInput(format!("{key}: {msg}")));
        if self.p < 2 {
            return bad("p", "must be at least 2");
        }
        if self.n < 1 {
            return bad("n", "must be at least 1");
        }
        if self.s > self.p {
            return bad("s", "must not exceed p");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma", "must be positive");
        }
        if !self.magnitude.is_finite() {
            return bad("magnitude", "must be finite");
        }
        if self.trials < 1 {
            return bad("trials", "must be at least 1");
        }
        if self.estimators.is_empty() {
            return bad("estimators", "must list at least one estimator");
        }
        if !(self.path_floor > 0.0 && self.path_floor < 1.0) {
            return bad("path_floor", "must lie in (0, 1)");
        }
        for (i, e) in self.estimators.iter().enumerate() {
            e.validate(&format!("estimators[{i}]"))?;
        }
        let mut labels: Vec<String> = self.estimators.iter().map(|e| e.label()).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("estimators", "contains duplicates");
        }
        Ok(())
    }

    fn trial_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, STREAM_TRIAL, index as u64)
    }

    fn design_seed(&self, trial_seed: u64) -> u64 {
        match self.design_mode {
            DesignMode::FreshPerTrial => derive_seed(trial_seed, STREAM_DESIGN, 0),
            DesignMode::Fixed => derive_seed(self.master_seed, STREAM_DESIGN, 0),
        }
    }
}

/// Outcome of one estimator on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRecord {
    pub label: String,
    /// `|T_hat cap T|` with matching signs.
    pub true_positives: usize,
    /// `|T_hat \ T|`.
    pub false_positives: usize,
    /// Indices in `T_hat cap T` with the wrong sign.
    pub sign_errors: usize,
    pub exact_recovery: bool,
    pub sigma_hat: Option<f64>,
    pub lambda_hat: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub wall_time_ms: f64,
    pub error: Option<String>,
}

impl EstimatorRecord {
    fn failed(label: String, err: &Error, wall_time_ms: f64) -> Self {
        Self {
            label,
            true_positives: 0,
            false_positives: 0,
            sign_errors: 0,
            exact_recovery: false,
            sigma_hat: None,
            lambda_hat: None,
            converged: false,
            iterations: 0,
            wall_time_ms,
            error: Some(err.to_string()),
        }
    }
}

/// Every estimator's outcome on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial_index: usize,
    pub trial_seed: u64,
    pub records: Vec<EstimatorRecord>,
}

/// Support recovery counts of `beta` against `truth`.
pub fn recovery_counts(truth: &GroundTruth, beta: &SparseVector) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut sign_err) = (0, 0, 0);
    for (&j, &v) in beta.indices.iter().zip(&beta.values) {
        if v == 0.0 {
            continue;
        }
        let t = truth.beta[j];
        if t == 0.0 {
            fp += 1;
        } else if t.signum() == v.signum() {
            tp += 1;
        } else {
            sign_err += 1;
        }
    }
    (tp, fp, sign_err)
}

struct Instance {
    truth: GroundTruth,
    obs: Observation,
}

fn run_estimator(
    cfg: &ExperimentConfig,
    spec: &EstimatorSpec,
    x: &DesignMatrix,
    inst: &Instance,
    path: &Result<LassoPath<'_>>,
) -> Result<TunedOrSolved> {
    let y = &inst.obs.y;
    match spec {
        EstimatorSpec::LassoKnown { factor } => {
            let lambda = factor * cfg.sigma * (2.0 * (x.p() as f64).ln()).sqrt();
            let sol = match path {
                Ok(path) if lambda >= path.lowest_lambda() => eval_path(path, lambda)?,
                _ => solve_lasso(x, y, lambda, &cfg.solver)?,
            };
            Ok(TunedOrSolved {
                beta: sol.beta,
                lambda,
                sigma_hat: None,
                converged: true,
                iterations: 0,
            })
        }
        EstimatorSpec::StrategyA { cvar, method } => {
            let est = match (method, path) {
                (MethodA::PathExact, Ok(path)) => tune_path_exact_a_on(path, *cvar)?,
                (MethodA::FixedPoint, Ok(path)) => {
                    let fp_cfg = FixedPointConfig {
                        path_floor: cfg.path_floor,
                        ..FixedPointConfig::default()
                    };
                    let est = tune_fixed_point(x, y, *cvar, &fp_cfg)?;
                    if est.converged {
                        est
                    } else {
                        log::info!("fixed point stalled; using the exact root");
                        tune_path_exact_a_on(path, *cvar)?
                    }
                }
                (_, Err(_)) => {
                    let fp_cfg = FixedPointConfig {
                        backend: Backend::CoordinateDescent(cfg.solver),
                        ..FixedPointConfig::default()
                    };
                    tune_fixed_point(x, y, *cvar, &fp_cfg)?
                }
            };
            Ok(TunedOrSolved::from(est))
        }
        EstimatorSpec::StrategyB { c, method } => {
            let path = path
                .as_ref()
                .map_err(|e| Error::InvalidInput(format!("homotopy path unavailable: {e}")))?;
            let est = match method {
                MethodB::PathExact => tune_path_exact_b_on(path, *c)?,
                MethodB::Newton => tune_newton_on(path, *c, &NewtonConfig::default())?,
            };
            Ok(TunedOrSolved::from(est))
        }
    }
}

struct TunedOrSolved {
    beta: SparseVector,
    lambda: f64,
    sigma_hat: Option<f64>,
    converged: bool,
    iterations: usize,
}

impl From<TunedEstimate> for TunedOrSolved {
    fn from(e: TunedEstimate) -> Self {
        Self {
            beta: e.beta,
            lambda: e.lambda_hat,
            sigma_hat: Some(e.sigma_hat),
            converged: e.converged,
            iterations: e.iterations,
        }
    }
}

fn generate_design(cfg: &ExperimentConfig, trial_seed: u64) -> Result<DesignMatrix> {
    DesignMatrix::gaussian(cfg.n, cfg.p, cfg.design_seed(trial_seed))
}

fn run_trial_on(cfg: &ExperimentConfig, index: usize, x: &DesignMatrix) -> Result<TrialReport> {
    let trial_seed = cfg.trial_seed(index);
    let truth = GroundTruth::generate(
        cfg.p,
        cfg.s,
        cfg.magnitude,
        cfg.sigma,
        derive_seed(trial_seed, STREAM_TRUTH, 0),
    )?;
    let obs = Observation::generate(x, &truth, derive_seed(trial_seed, STREAM_NOISE, 0))?;
    let inst = Instance { truth, obs };
    let tau = crate::lasso::tau_threshold(x, &inst.obs.y);
    let path_cfg = PathConfig::from(cfg.solver);
    let path = homotopy_path_with(x, &inst.obs.y, cfg.path_floor * tau, &path_cfg);
    if let Err(e) = &path {
        log::warn!("trial {index}: path failed ({e}); using coordinate descent where possible");
    }

    let records = cfg
        .estimators
        .iter()
        .map(|spec| {
            let start = Instant::now();
            let outcome = run_estimator(cfg, spec, x, &inst, &path);
            let wall = if cfg.record_timing {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            match outcome {
                Ok(o) => {
                    let (tp, fp, se) = recovery_counts(&inst.truth, &o.beta);
                    EstimatorRecord {
                        label: spec.label(),
                        true_positives: tp,
                        false_positives: fp,
                        sign_errors: se,
                        exact_recovery: fp == 0 && se == 0 && tp == cfg.s,
                        sigma_hat: o.sigma_hat,
                        lambda_hat: Some(o.lambda),
                        converged: o.converged,
                        iterations: o.iterations,
                        wall_time_ms: wall,
                        error: None,
                    }
                }
                Err(e) => EstimatorRecord::failed(spec.label(), &e, wall),
            }
        })
        .collect();
    Ok(TrialReport {
        trial_index: index,
        trial_seed,
        records,
    })
}

/// Runs trial `index`: draws the instance from derived seeds and applies every
/// estimator. Estimator failures are recorded, not propagated.
pub fn run_trial(cfg: &ExperimentConfig, index: usize) -> Result<TrialReport> {
    cfg.validate()?;
    let x = generate_design(cfg, cfg.trial_seed(index))?;
    run_trial_on(cfg, index, &x)
}

/// `(bin, count)` for integer-valued statistics.
pub type CountHistogram = Vec<(usize, usize)>;

/// Fixed-width histogram bin `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Per-estimator aggregate over all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub label: String,
    pub trials: usize,
    pub failures: usize,
    pub not_converged: usize,
    pub exact_recoveries: usize,
    pub exact_recovery_rate: f64,
    /// Wilson 95% interval for the exact-recovery rate.
    pub exact_recovery_ci: (f64, f64),
    pub true_positive_histogram: CountHistogram,
    pub false_positive_histogram: CountHistogram,
    pub median_true_positives: f64,
    pub median_false_positives: f64,
    pub mean_true_positives: f64,
    pub mean_false_positives: f64,
    /// Non-empty bins only.
    pub sigma_hat_histogram: Vec<Bin>,
    pub sigma_hat_mean: Option<f64>,
    pub sigma_hat_std: Option<f64>,
}

/// Full output of [`run_monte_carlo`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub generator: String,
    pub config: ExperimentConfig,
    pub summaries: Vec<EstimatorSummary>,
    pub trials: Vec<TrialReport>,
}

/// Wilson score interval at 95% for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let (k, n) = (k as f64, n as f64);
    let phat = k / n;
    let denom = 1.0 + Z * Z / n;
    let center = (phat + Z * Z / (2.0 * n)) / denom;
    let half = Z * (phat * (1.0 - phat) / n + Z * Z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn count_histogram(values: &[usize]) -> CountHistogram {
    let top = values.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0; top + 1];
    for &v in values {
        counts[v] += 1;
    }
    counts.into_iter().enumerate().collect()
}

/// Bins of width `sigma / 20` starting at zero, up to the largest value.
/// Non-empty bins of width `sigma / 20` starting at zero.
fn sigma_histogram(values: &[f64], sigma: f64) -> Vec<Bin> {
    let width = sigma / 20.0;
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry((v / width).floor() as u64).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(i, count)| Bin {
            lo: i as f64 * width,
            hi: (i + 1) as f64 * width,
            count,
        })
        .collect()
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    } else {
        None
    };
    (Some(mean), std)
}

/// Aggregates ordered trial reports.
pub fn summarize(cfg: &ExperimentConfig, trials: &[TrialReport]) -> Vec<EstimatorSummary> {
    cfg.estimators
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let recs: Vec<&EstimatorRecord> = trials.iter().map(|t| &t.records[k]).collect();
            let ok: Vec<&&EstimatorRecord> = recs.iter().filter(|r| r.error.is_none()).collect();
            let tps: Vec<usize> = ok.iter().map(|r| r.true_positives).collect();
            let fps: Vec<usize> = ok.iter().map(|r| r.false_positives).collect();
            let sig: Vec<f64> = ok.iter().filter_map(|r| r.sigma_hat).collect();
            let exact = recs.iter().filter(|r| r.exact_recovery).count();
            let tpf: Vec<f64> = tps.iter().map(|&v| v as f64).collect();
            let fpf: Vec<f64> = fps.iter().map(|&v| v as f64).collect();
            let (sigma_hat_mean, sigma_hat_std) = mean_std(&sig);
            EstimatorSummary {
                label: spec.label(),
                trials: recs.len(),
                failures: recs.len() - ok.len(),
                not_converged: ok.iter().filter(|r| !r.converged).count(),
                exact_recoveries: exact,
                exact_recovery_rate: exact as f64 / recs.len() as f64,
                exact_recovery_ci: wilson_interval(exact, recs.len()),
                true_positive_histogram: count_histogram(&tps),
                false_positive_histogram: count_histogram(&fps),
                median_true_positives: median(&tpf),
                median_false_positives: median(&fpf),
                mean_true_positives: mean_std(&tpf).0.unwrap_or(f64::NAN),
                mean_false_positives: mean_std(&fpf).0.unwrap_or(f64::NAN),
                sigma_hat_histogram: sigma_histogram(&sig, cfg.sigma),
                sigma_hat_mean,
                sigma_hat_std,
            }
        })
        .collect()
}

/// Runs every trial in parallel and reduces the results in trial order.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<AggregateReport> {
    cfg.validate()?;
    let fixed = match cfg.design_mode {
        DesignMode::Fixed => Some(generate_design(cfg, 0)?),
        DesignMode::FreshPerTrial => None,
    };
    let trials: Vec<TrialReport> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| match &fixed {
            Some(x) => run_trial_on(cfg, i, x),
            None => {
                let x = generate_design(cfg, cfg.trial_seed(i))?;
                run_trial_on(cfg, i, &x)
            }
        })
        .collect::<Result<_>>()?;
    Ok(AggregateReport {
        schema_version: SCHEMA_VERSION,
        generator: GENERATOR_NAME.to_string(),
        summaries: summarize(cfg, &trials),
        config: cfg.clone(),
        trials,
    })
}

/// Output format of [`emit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

const CSV_FIELDS: [&str; 10] = [
    "tp",
    "fp",
    "sign_errors",
    "exact",
    "sigma_hat",
    "lambda_hat",
    "converged",
    "iterations",
    "wall_time_ms",
    "error",
];

/// Header of the per-trial CSV: `trial,trial_seed` then `<label>.<field>` for
/// every estimator and field.
pub fn csv_header(cfg: &ExperimentConfig) -> Vec<String> {
    let mut cols = vec!["trial".to_string(), "trial_seed".to_string()];
    for spec in &cfg.estimators {
        let label = spec.label();
        cols.extend(CSV_FIELDS.iter().map(|f| format!("{label}.{f}")));
    }
    cols
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v}"))
}

/// Writes one CSV row per trial, or the whole report as JSON.
pub fn emit<W: Write>(report: &AggregateReport, format: OutputFormat, writer: W) -> Result<()> {
    match format {
        OutputFormat::Json => serde_json::to_writer_pretty(writer, report)?,
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(csv_header(&report.config))?;
            for t in &report.trials {
                let mut row = vec![t.trial_index.to_string(), t.trial_seed.to_string()];
                for r in &t.records {
                    row.push(r.true_positives.to_string());
                    row.push(r.false_positives.to_string());
                    row.push(r.sign_errors.to_string());
                    row.push(r.exact_recovery.to_string());
                    row.push(opt(r.sigma_hat));
                    row.push(opt(r.lambda_hat));
                    row.push(r.converged.to_string());
                    row.push(r.iterations.to_string());
                    row.push(format!("{}", r.wall_time_ms));
                    row.push(r.error.clone().unwrap_or_default());
                }
                w.write_record(&row)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Histograms as long-format CSV: `estimator,statistic,bin_lo,bin_hi,count`.
pub fn emit_histograms<W: Write>(report: &AggregateReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["estimator", "statistic", "bin_lo", "bin_hi", "count"])?;
    for s in &report.summaries {
        for (stat, hist) in [
            ("true_positives", &s.true_positive_histogram),
            ("false_positives", &s.false_positive_histogram),
        ] {
            for &(bin, count) in hist {
                w.write_record([
                    s.label.clone(),
                    stat.to_string(),
                    bin.to_string(),
                    (bin + 1).to_string(),
                    count.to_string(),
                ])?;
            }
        }
        for b in &s.sigma_hat_histogram {
            w.write_record([
                s.label.clone(),
                "sigma_hat".to_string(),
                b.lo.to_string(),
                b.hi.to_string(),
                b.count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Human-readable one-line-per-estimator summary.
pub fn summary_table(report: &AggregateReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>7} {:>16} {:>7} {:>7} {:>9}",
        "estimator", "exact", "95% ci", "med tp", "med fp", "mean sig"
    );
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "{:<24} {:>7} {:>16} {:>7} {:>7} {:>9}",
            s.label,
            format!("{}/{}", s.exact_recoveries, s.trials),
            format!(
                "[{:.3}, {:.3}]",
                s.exact_recovery_ci.0, s.exact_recovery_ci.1
            ),
            s.median_true_positives,
            s.median_false_positives,
            s.sigma_hat_mean
                .map_or("-".to_string(), |m| format!("{m:.4}")),
        );
    }
    out
}
