//! Evaluation protocol: synthetic tables, artificial censoring at a fixed
//! rate, multi-target vs repeated single-target imputation, paired t-tests,
//! convergence and runtime probes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use mttm_core::linalg::lu_solve;
use mttm_core::{
    fit, impute, sttm_fit, AscentWorkspace, CensoringBound, Clock, Dataset, FillPolicy, FitConfig, ModelParams,
    TargetEntry,
};
use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

/// Largest accepted condition number of `I - C`.
pub const MAX_CONDITION: f64 = 1e6;

/// Spectral-radius cap for [`random_truth`]; nearer 1 the targets' variance
/// explodes and the benchmark measures the amplification, not the method.
pub const RANDOM_TRUTH_MAX_RADIUS: f64 = 0.8;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] mttm_core::Error),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<HarnessError>,
    },

    #[error("no censored entries to score")]
    NothingToScore,

    #[error("imputed and true values cover different entries")]
    KeyMismatch,

    #[error("row {row}: ties allow censoring {achieved} values, not the requested {requested}")]
    Ties {
        row: usize,
        requested: usize,
        achieved: usize,
    },

    #[error("row {row}: censoring {requested} of {n} values would leave nothing observed")]
    TooMany { row: usize, requested: usize, n: usize },

    #[error("coefficients rejected: {0}")]
    Coefficients(String),

    #[error("invalid request: {0}")]
    Invalid(String),

    #[error("degenerate paired differences (zero variance)")]
    DegenerateDifferences,
}

impl HarnessError {
    /// Failures of the numerics rather than of the request.
    pub fn is_numerical(&self) -> bool {
        match self {
            HarnessError::Model(e) => e.is_numerical(),
            HarnessError::Trial { source, .. } => source.is_numerical(),
            HarnessError::DegenerateDifferences => true,
            _ => false,
        }
    }

    fn in_trial(self, trial: usize) -> Self {
        HarnessError::Trial {
            trial,
            source: Box::new(self),
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic data.

/// A fully observed synthetic table and the coefficients that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub data: Dataset,
    pub truth: ModelParams,
}

/// Spectral radius of the coupling matrix after checking stability and
/// conditioning.
fn coupling_check(params: &ModelParams) -> Result<f64, HarnessError> {
    let m = params.m();
    let c = DMatrix::from_row_slice(m, m, &params.coupling_matrix());
    let radius = c.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(radius < 1.0) {
        return Err(HarnessError::Coefficients(format!(
            "spectral radius {radius:.4} is not below 1"
        )));
    }
    let lhs = DMatrix::identity(m, m) - c;
    let sv = lhs.singular_values();
    let cond = sv.max() / sv.min();
    if !(cond <= MAX_CONDITION) {
        return Err(HarnessError::Coefficients(format!(
            "condition number {cond:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }
    Ok(radius)
}

/// Draws `n` examples: `x ~ N(0, I_d)` and `y` solving `(I - C) y = W x + e`
/// with `e ~ N(0, I / beta)`, where `C` is the coupling matrix of `truth`.
pub fn generate_synthetic(truth: &ModelParams, n: usize, seed: u64) -> Result<Synthetic, HarnessError> {
    truth.check()?;
    coupling_check(truth)?;
    let (m, d) = (truth.m(), truth.d());
    let c = truth.coupling_matrix();
    let lhs: Vec<f64> = (0..m * m)
        .map(|idx| if idx / m == idx % m { 1.0 } else { 0.0 } - c[idx])
        .collect();
    let sd = 1.0 / truth.beta.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * d);
    let mut y = vec![TargetEntry::Observed(0.0); m * n];
    for i in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let rhs: Vec<f64> = truth
            .linear_offsets(&row)
            .iter()
            .map(|mean| mean + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let solved = lu_solve(&lhs, &rhs, m).ok_or_else(|| HarnessError::Coefficients("I - C is singular".into()))?;
        for k in 0..m {
            y[k * n + i] = TargetEntry::Observed(solved[k]);
        }
        x.extend(row);
    }
    let data = Dataset::from_flat(n, d, x, m, y)?.with_names(
        (1..=m).map(|k| format!("t{k}")).collect(),
        (1..=d).map(|j| format!("x{j}")).collect(),
    )?;
    Ok(Synthetic {
        data,
        truth: truth.clone(),
    })
}

/// Random coefficients: cross coefficients of magnitude about `magnitude`
/// (uniform in [0.8, 1.2] times it) with random signs, resampled until the
/// spectral radius of the coupling is at most [`RANDOM_TRUTH_MAX_RADIUS`];
/// feature coefficients standard normal.
pub fn random_truth(m: usize, d: usize, magnitude: f64, beta: f64, seed: u64) -> Result<ModelParams, HarnessError> {
    if m == 0 {
        return Err(HarnessError::Invalid("m must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let a: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..m - 1)
                    .map(|_| {
                        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        sign * magnitude * rng.random_range(0.8..=1.2)
                    })
                    .collect()
            })
            .collect();
        let w: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let params = ModelParams { a, w, beta };
        params.check()?;
        if coupling_check(&params).is_ok_and(|r| r <= RANDOM_TRUTH_MAX_RADIUS) {
            return Ok(params);
        }
    }
    Err(HarnessError::Coefficients(format!(
        "no stable coupling found with magnitude {magnitude} for m = {m}"
    )))
}

// ---------------------------------------------------------------------------
// Censoring.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Interval,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Interval => "interval",
        })
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            "interval" => Ok(Side::Interval),
            other => Err(format!("unknown side '{other}' (left, right, interval)")),
        }
    }
}

/// Which rows to censor, how, and at what rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoringScenario {
    pub rate: f64,
    pub targets: Vec<usize>,
    pub side: Side,
}

/// Hidden cells and their true values, keyed by `(target, example)`.
pub type ValueMap = BTreeMap<(usize, usize), f64>;

/// Number of cells a rate censors in a row of `n`.
pub fn censor_count(rate: f64, n: usize) -> usize {
    (rate * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Censors each designated row at its empirical quantile so exactly
/// `ceil(rate * n)` cells are hidden, with one limit per row:
///
/// * left: cells at or below the limit become `(-inf, limit]`;
/// * right: mirrored;
/// * interval: a block of consecutive order statistics centred on the
///   median becomes one window bounded by midpoints to the neighbouring
///   order statistics.
pub fn apply_censoring(data: &Dataset, scenario: &CensoringScenario) -> Result<(Dataset, ValueMap), HarnessError> {
    if !(0.0..1.0).contains(&scenario.rate) {
        return Err(HarnessError::Invalid(format!(
            "rate {} must lie in [0, 1)",
            scenario.rate
        )));
    }
    let n = data.n();
    let mut y = data.entries().to_vec();
    let mut truth = ValueMap::new();
    let rows: BTreeSet<usize> = scenario.targets.iter().copied().collect();
    for &k in &rows {
        if k >= data.m() {
            return Err(HarnessError::Invalid(format!("target {k} out of range")));
        }
        let count = censor_count(scenario.rate, n);
        if count == 0 {
            continue;
        }
        if count >= n {
            return Err(HarnessError::TooMany {
                row: k,
                requested: count,
                n,
            });
        }
        let values: Vec<f64> = data
            .target_row(k)
            .iter()
            .map(|e| {
                e.observed()
                    .ok_or_else(|| HarnessError::Invalid("censoring needs a fully observed row".into()))
            })
            .collect::<Result<_, _>>()?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| values[p].total_cmp(&values[q]));
        let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let (bound, start) = match scenario.side {
            Side::Left => (CensoringBound::below(sorted[count - 1]), 0),
            Side::Right => (CensoringBound::above(sorted[n - count]), n - count),
            Side::Interval => {
                let start = (n - count) / 2;
                let end = start + count;
                let lower = if start == 0 {
                    f64::NEG_INFINITY
                } else {
                    0.5 * (sorted[start - 1] + sorted[start])
                };
                let upper = if end == n {
                    f64::INFINITY
                } else {
                    0.5 * (sorted[end - 1] + sorted[end])
                };
                (CensoringBound { lower, upper }, start)
            }
        };
        let block = &sorted[start..start + count];
        let achieved = values.iter().filter(|&&v| bound.contains(v)).count();
        let boundary_tie = (start > 0 && sorted[start - 1] >= block[0])
            || (start + count < n && sorted[start + count] <= block[count - 1]);
        if achieved != count || boundary_tie || !bound.is_valid() {
            return Err(HarnessError::Ties {
                row: k,
                requested: count,
                achieved,
            });
        }
        for &i in &order[start..start + count] {
            y[k * n + i] = TargetEntry::Censored(bound);
            truth.insert((k, i), values[i]);
        }
    }
    Ok((data.with_targets(y)?, truth))
}

// ---------------------------------------------------------------------------
// Scoring.

/// Root mean squared difference over identical key sets.
pub fn rmse(imputed: &ValueMap, truth: &ValueMap) -> Result<f64, HarnessError> {
    if truth.is_empty() {
        return Err(HarnessError::NothingToScore);
    }
    if imputed.len() != truth.len() || imputed.keys().zip(truth.keys()).any(|(a, b)| a != b) {
        return Err(HarnessError::KeyMismatch);
    }
    let sum: f64 = imputed
        .values()
        .zip(truth.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / truth.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, HarnessError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(HarnessError::Invalid(
            "paired t-test needs two equal-length samples of size >= 2".into(),
        ));
    }
    let n = a.len();
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = n - 1;
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(TTest { t: 0.0, p: 1.0, df });
    }
    let (mean, sd) = mean_sd(&diffs);
    let scale = diffs.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    if sd <= 64.0 * f64::EPSILON * scale {
        return Err(HarnessError::DegenerateDifferences);
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(TTest { t, p, df })
}

/// Mean and sample standard deviation (`n - 1` denominator).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// Benchmark.

/// Where each trial's fully observed table comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// A fresh synthetic draw of `n` examples per trial.
    Synthetic { truth: ModelParams, n: usize },
    /// A random subsample (without replacement) of a fully observed table.
    Table { data: Dataset, sample: usize },
}

impl DataSource {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Dataset, HarnessError> {
        match self {
            DataSource::Synthetic { truth, n } => Ok(generate_synthetic(truth, *n, rng.random())?.data),
            DataSource::Table { data, sample } => {
                if *sample > data.n() {
                    return Err(HarnessError::Invalid(format!(
                        "sample of {sample} from a table of {} rows",
                        data.n()
                    )));
                }
                let mut picked = index::sample(rng, data.n(), *sample).into_vec();
                picked.sort_unstable();
                Ok(data.select_examples(&picked))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub name: String,
    pub source: DataSource,
    pub scenario: CensoringScenario,
    pub trials: usize,
    pub seed: u64,
    pub config: FitConfig,
    pub fill: FillPolicy,
}

/// Per-scenario comparison; field order matches the tabular output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub scenario: String,
    pub rate: f64,
    pub trials: usize,
    pub mttm_mean: f64,
    pub mttm_sd: f64,
    pub sttm_mean: f64,
    pub sttm_sd: f64,
    pub t: f64,
    pub p: f64,
    pub mttm_rmse: Vec<f64>,
    pub sttm_rmse: Vec<f64>,
}

/// RMSE of the multi-target imputation and of the repeated single-target
/// baseline for one censored table.
pub fn score_trial(
    censored: &Dataset,
    truth: &ValueMap,
    config: &FitConfig,
    fill: FillPolicy,
) -> Result<(f64, f64), HarnessError> {
    if truth.is_empty() {
        return Err(HarnessError::NothingToScore);
    }
    let joint = impute(censored, config)?;
    let joint_map: ValueMap = truth.keys().map(|&(k, i)| ((k, i), joint.value(k, i))).collect();
    let rows: BTreeSet<usize> = truth.keys().map(|&(k, _)| k).collect();
    let mut single_map = ValueMap::new();
    for k in rows {
        let single = sttm_fit(censored, k, fill, config)?;
        for &(kk, i) in truth.keys().filter(|(kk, _)| *kk == k) {
            single_map.insert((kk, i), single.q.mean(0, i));
        }
    }
    Ok((rmse(&joint_map, truth)?, rmse(&single_map, truth)?))
}

/// Runs the trials in parallel; each trial's randomness comes from its own
/// stream of the master seed, so results do not depend on scheduling.
pub fn benchmark_compare(spec: &BenchmarkSpec) -> Result<BenchmarkReport, HarnessError> {
    if spec.trials < 2 {
        return Err(HarnessError::Invalid("at least two trials are needed".into()));
    }
    let results: Vec<Result<(f64, f64), HarnessError>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(trial as u64);
            let mut run = || {
                let data = spec.source.draw(&mut rng)?;
                let (censored, truth) = apply_censoring(&data, &spec.scenario)?;
                score_trial(&censored, &truth, &spec.config, spec.fill)
            };
            run().map_err(|e| match e {
                HarnessError::NothingToScore => e,
                other => other.in_trial(trial),
            })
        })
        .collect();
    let mut joint = Vec::with_capacity(spec.trials);
    let mut single = Vec::with_capacity(spec.trials);
    for result in results {
        let (a, b) = result?;
        joint.push(a);
        single.push(b);
    }
    let test = paired_t_test(&joint, &single)?;
    let (mttm_mean, mttm_sd) = mean_sd(&joint);
    let (sttm_mean, sttm_sd) = mean_sd(&single);
    Ok(BenchmarkReport {
        scenario: spec.name.clone(),
        rate: spec.scenario.rate,
        trials: spec.trials,
        mttm_mean,
        mttm_sd,
        sttm_mean,
        sttm_sd,
        t: test.t,
        p: test.p,
        mttm_rmse: joint,
        sttm_rmse: single,
    })
}

pub const REPORT_COLUMNS: [&str; 9] = [
    "scenario",
    "rate",
    "trials",
    "mttm_mean",
    "mttm_sd",
    "sttm_mean",
    "sttm_sd",
    "t",
    "p",
];

/// Tab-separated summary table, one row per report.
pub fn reports_tsv(reports: &[BenchmarkReport]) -> String {
    let mut out = REPORT_COLUMNS.join("\t");
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.scenario, r.rate, r.trials, r.mttm_mean, r.mttm_sd, r.sttm_mean, r.sttm_sd, r.t, r.p
        ));
    }
    out
}

pub fn reports_json(reports: &[BenchmarkReport]) -> String {
    let mut text = serde_json::to_string_pretty(reports).expect("reports serialize");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// Probes.

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTrace {
    /// Objective reached by a long run with a very tight tolerance.
    pub f_star: f64,
    pub objective: Vec<f64>,
    /// `f_star - objective[t]`.
    pub gaps: Vec<f64>,
}

/// Gap of each sweep's objective to a long-run optimum.
pub fn convergence_probe(data: &Dataset, config: &FitConfig) -> Result<ConvergenceTrace, HarnessError> {
    let long = FitConfig {
        rel_tol: 1e-15,
        max_sweeps: config.max_sweeps.max(100) * 20,
        record_trace: true,
        ..config.clone()
    };
    let reference = fit(data, &long)?;
    let run = fit(
        data,
        &FitConfig {
            record_trace: true,
            ..config.clone()
        },
    )?;
    let f_star = reference
        .report
        .objective_trace
        .iter()
        .chain(&run.report.objective_trace)
        .fold(f64::NEG_INFINITY, |acc, &f| acc.max(f));
    let gaps = run.report.objective_trace.iter().map(|f| f_star - f).collect();
    Ok(ConvergenceTrace {
        f_star,
        objective: run.report.objective_trace,
        gaps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuntimeRow {
    pub n: usize,
    pub sweeps: usize,
    pub seconds: f64,
}

/// Wall-clock time of exactly `sweeps` sweeps (after initialization) on
/// synthetic data with 20% left-censoring in every target.
pub fn runtime_probe(
    ns: &[usize],
    m: usize,
    d: usize,
    sweeps: usize,
    seed: u64,
    clock: &dyn Clock,
) -> Result<Vec<RuntimeRow>, HarnessError> {
    if sweeps == 0 {
        return Err(HarnessError::Invalid("sweeps must be positive".into()));
    }
    if ns.is_empty() || ns.iter().any(|&n| n < 2) {
        return Err(HarnessError::Invalid("every n in the grid must be at least 2".into()));
    }
    let truth = random_truth(m, d, 0.3, 1.0, seed)?;
    let scenario = CensoringScenario {
        rate: 0.2,
        targets: (0..m).collect(),
        side: Side::Left,
    };
    ns.iter()
        .map(|&n| {
            let data = generate_synthetic(&truth, n, seed)?.data;
            let (censored, _) = apply_censoring(&data, &scenario)?;
            let mut ws = AscentWorkspace::new(&censored, FitConfig::default())?;
            let start = clock.seconds();
            for sweep in 1..=sweeps {
                ws.sweep().map_err(|e| mttm_core::Error::AtSweep {
                    sweep,
                    source: Box::new(e),
                })?;
            }
            Ok(RuntimeRow {
                n,
                sweeps,
                seconds: clock.seconds() - start,
            })
        })
        .collect()
}

pub fn runtime_tsv(rows: &[RuntimeRow]) -> String {
    let mut out = String::from("n\tsweeps\tseconds\n");
    for r in rows {
        out.push_str(&format!("{}\t{}\t{:.6}\n", r.n, r.sweeps, r.seconds));
    }
    out
}
