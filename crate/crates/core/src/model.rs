//! Domain types shared by the fitter, the imputation API and the IO layer.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Censoring window `[lower, upper]` for one target entry. Either side may be
/// infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensoringBound {
    pub lower: f64,
    pub upper: f64,
}

impl CensoringBound {
    /// Checked constructor: requires `lower < upper` and no NaN.
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let bound = CensoringBound { lower, upper };
        if bound.is_valid() {
            Ok(bound)
        } else {
            Err(Error::Domain("censoring bound requires lower < upper"))
        }
    }

    /// Whole real line; only meaningful as a truncated-normal window.
    pub const fn unbounded() -> Self {
        CensoringBound {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    /// Left censoring below a detection limit: `(-inf, limit]`.
    pub const fn below(limit: f64) -> Self {
        CensoringBound {
            lower: f64::NEG_INFINITY,
            upper: limit,
        }
    }

    /// Right censoring: `[limit, +inf)`.
    pub const fn above(limit: f64) -> Self {
        CensoringBound {
            lower: limit,
            upper: f64::INFINITY,
        }
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(lower, upper)
    }

    pub fn is_valid(&self) -> bool {
        !self.lower.is_nan()
            && !self.upper.is_nan()
            && self.lower < self.upper
            && self.lower != f64::INFINITY
            && self.upper != f64::NEG_INFINITY
    }

    pub fn has_finite_side(&self) -> bool {
        self.lower.is_finite() || self.upper.is_finite()
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    /// Strict containment on the finite sides.
    pub fn contains_strictly(&self, value: f64) -> bool {
        (self.lower == f64::NEG_INFINITY || self.lower < value) && (self.upper == f64::INFINITY || value < self.upper)
    }

    /// Finite bound closest to the censored mass: the upper limit for left
    /// censoring, the lower limit for right censoring, the midpoint for an
    /// interval.
    pub fn nearest_finite(&self) -> f64 {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => 0.5 * (self.lower + self.upper),
            (false, true) => self.upper,
            (true, false) => self.lower,
            (false, false) => 0.0,
        }
    }

    pub fn shifted(&self, offset: f64) -> Self {
        CensoringBound {
            lower: self.lower + offset,
            upper: self.upper + offset,
        }
    }
}

/// One cell of the target matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetEntry {
    Observed(f64),
    Censored(CensoringBound),
}

impl TargetEntry {
    pub fn is_censored(&self) -> bool {
        matches!(self, TargetEntry::Censored(_))
    }

    pub fn observed(&self) -> Option<f64> {
        match *self {
            TargetEntry::Observed(v) => Some(v),
            TargetEntry::Censored(_) => None,
        }
    }

    pub fn bound(&self) -> Option<CensoringBound> {
        match *self {
            TargetEntry::Observed(_) => None,
            TargetEntry::Censored(b) => Some(b),
        }
    }
}

/// Explanatory matrix `x` (n x d) and target matrix `y` (m x n).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    x_rows: usize,
    d: usize,
    y: Vec<TargetEntry>,
    m: usize,
    n: usize,
    target_names: Vec<String>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from `n` feature rows and `m` target rows of length
    /// `n`. Rows must be rectangular; everything else is left to
    /// [`Dataset::validate`].
    pub fn new(x_rows: Vec<Vec<f64>>, y_rows: Vec<Vec<TargetEntry>>) -> Result<Self> {
        let d = x_rows.first().map_or(0, Vec::len);
        if x_rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged feature rows"));
        }
        let n = y_rows.first().map_or(x_rows.len(), Vec::len);
        if y_rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged target rows"));
        }
        let m = y_rows.len();
        let x_count = x_rows.len();
        Ok(Dataset {
            x: x_rows.into_iter().flatten().collect(),
            x_rows: x_count,
            d,
            y: y_rows.into_iter().flatten().collect(),
            m,
            n,
            target_names: default_names("y", m),
            feature_names: default_names("x", d),
        })
    }

    /// Flat constructor: `x` is n x d row-major, `y` is m x n row-major.
    pub fn from_flat(n: usize, d: usize, x: Vec<f64>, m: usize, y: Vec<TargetEntry>) -> Result<Self> {
        if x.len() != n * d {
            return Err(Error::Dimension("x length must be n * d"));
        }
        if y.len() != m * n {
            return Err(Error::Dimension("y length must be m * n"));
        }
        Ok(Dataset {
            x,
            x_rows: n,
            d,
            y,
            m,
            n,
            target_names: default_names("y", m),
            feature_names: default_names("x", d),
        })
    }

    pub fn with_names(mut self, target_names: Vec<String>, feature_names: Vec<String>) -> Result<Self> {
        if target_names.len() != self.m || feature_names.len() != self.d {
            return Err(Error::Dimension("name count does not match matrix shape"));
        }
        self.target_names = target_names;
        self.feature_names = feature_names;
        Ok(self)
    }

    /// Number of examples.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of targets.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of explanatory features.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn entry(&self, k: usize, i: usize) -> &TargetEntry {
        &self.y[k * self.n + i]
    }

    pub fn target_row(&self, k: usize) -> &[TargetEntry] {
        &self.y[k * self.n..(k + 1) * self.n]
    }

    pub fn entries(&self) -> &[TargetEntry] {
        &self.y
    }

    /// Indices `(k, i)` of censored entries, target-major.
    pub fn hidden_indices(&self) -> Vec<(usize, usize)> {
        (0..self.m)
            .flat_map(|k| (0..self.n).map(move |i| (k, i)))
            .filter(|&(k, i)| self.entry(k, i).is_censored())
            .collect()
    }

    /// Indices `(k, i)` of observed entries, target-major.
    pub fn visible_indices(&self) -> Vec<(usize, usize)> {
        (0..self.m)
            .flat_map(|k| (0..self.n).map(move |i| (k, i)))
            .filter(|&(k, i)| !self.entry(k, i).is_censored())
            .collect()
    }

    /// Appends a constant-1 feature column named `name`.
    pub fn with_constant_feature(&self, name: &str) -> Self {
        let d = self.d + 1;
        let mut x = Vec::with_capacity(self.x_rows * d);
        for i in 0..self.x_rows {
            x.extend_from_slice(&self.x[i * self.d..(i + 1) * self.d]);
            x.push(1.0);
        }
        let mut feature_names = self.feature_names.clone();
        feature_names.push(String::from(name));
        Dataset {
            x,
            d,
            feature_names,
            ..self.clone()
        }
    }

    /// Copy with the target matrix replaced; shape must match.
    pub fn with_targets(&self, y: Vec<TargetEntry>) -> Result<Self> {
        if y.len() != self.y.len() {
            return Err(Error::Dimension("replacement target matrix has the wrong size"));
        }
        Ok(Dataset { y, ..self.clone() })
    }

    /// Copy keeping only the given target rows, in the given order.
    pub fn select_targets(&self, targets: &[usize]) -> Result<Self> {
        if targets.iter().any(|&k| k >= self.m) {
            return Err(Error::Dimension("target index out of range"));
        }
        let mut y = Vec::with_capacity(targets.len() * self.n);
        for &k in targets {
            y.extend_from_slice(self.target_row(k));
        }
        Ok(Dataset {
            y,
            m: targets.len(),
            target_names: targets.iter().map(|&k| self.target_names[k].clone()).collect(),
            ..self.clone()
        })
    }

    /// Copy restricted to the given examples, in the given order.
    pub fn select_examples(&self, examples: &[usize]) -> Self {
        let mut x = Vec::with_capacity(examples.len() * self.d);
        for &i in examples {
            x.extend_from_slice(self.x_row(i));
        }
        let mut y = Vec::with_capacity(examples.len() * self.m);
        for k in 0..self.m {
            y.extend(examples.iter().map(|&i| *self.entry(k, i)));
        }
        Dataset {
            x,
            x_rows: examples.len(),
            y,
            n: examples.len(),
            ..self.clone()
        }
    }

    /// Structural and numerical checks. Never fails; collects every problem.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.n == 0 {
            report.violations.push(Violation::NoExamples);
        }
        if self.m == 0 {
            report.violations.push(Violation::NoTargets);
        }
        if self.x_rows != self.n {
            report.violations.push(Violation::ShapeMismatch {
                feature_rows: self.x_rows,
                target_columns: self.n,
            });
        }
        for (idx, v) in self.x.iter().enumerate() {
            if !v.is_finite() {
                report.violations.push(Violation::NonFiniteFeature {
                    example: idx / self.d.max(1),
                    feature: idx % self.d.max(1),
                });
            }
        }
        for k in 0..self.m {
            let mut censored = 0;
            for i in 0..self.n {
                match *self.entry(k, i) {
                    TargetEntry::Observed(v) => {
                        report.visible += 1;
                        if !v.is_finite() {
                            report
                                .violations
                                .push(Violation::NonFiniteObserved { target: k, example: i });
                        }
                    }
                    TargetEntry::Censored(b) => {
                        report.hidden += 1;
                        censored += 1;
                        if !b.is_valid() {
                            report
                                .violations
                                .push(Violation::DegenerateBound { target: k, example: i });
                        } else if !b.has_finite_side() {
                            report
                                .violations
                                .push(Violation::UnboundedCensoring { target: k, example: i });
                        }
                    }
                }
            }
            if self.n > 0 && censored == self.n {
                report.warnings.push(Warning::FullyCensoredTarget { target: k });
            }
        }
        report
    }

    pub(crate) fn require_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidDataset(report))
        }
    }
}

fn default_names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|j| format!("{prefix}{j}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoExamples,
    NoTargets,
    ShapeMismatch { feature_rows: usize, target_columns: usize },
    NonFiniteFeature { example: usize, feature: usize },
    NonFiniteObserved { target: usize, example: usize },
    DegenerateBound { target: usize, example: usize },
    UnboundedCensoring { target: usize, example: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoExamples => write!(f, "n ≥ 1 required"),
            Violation::NoTargets => write!(f, "m ≥ 1 required"),
            Violation::ShapeMismatch {
                feature_rows,
                target_columns,
            } => write!(
                f,
                "dimension mismatch: {feature_rows} feature rows vs {target_columns} target columns"
            ),
            Violation::NonFiniteFeature { example, feature } => {
                write!(f, "non-finite feature value at example {example}, feature {feature}")
            }
            Violation::NonFiniteObserved { target, example } => {
                write!(f, "non-finite observed value at target {target}, example {example}")
            }
            Violation::DegenerateBound { target, example } => {
                write!(f, "degenerate bound at target {target}, example {example}")
            }
            Violation::UnboundedCensoring { target, example } => {
                write!(
                    f,
                    "censored entry without a finite bound at target {target}, example {example}"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Every entry of the target row is censored; the fit still runs.
    FullyCensoredTarget { target: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::FullyCensoredTarget { target } => write!(f, "target {target} is entirely censored"),
        }
    }
}

/// Outcome of [`Dataset::validate`]. `hidden` and `visible` are the sizes of
/// the censored and observed index sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
    pub hidden: usize,
    pub visible: usize,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (j, v) in self.violations.iter().enumerate() {
            if j > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Fitted parameters: cross-target coefficients `a[k]` (length m-1, other
/// targets in index order with `k` skipped), feature coefficients `w[k]`
/// (length d) and the shared noise precision `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub a: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub beta: f64,
}

impl ModelParams {
    pub fn zeros(m: usize, d: usize, beta: f64) -> Self {
        ModelParams {
            a: alloc::vec![alloc::vec![0.0; m.saturating_sub(1)]; m],
            w: alloc::vec![alloc::vec![0.0; d]; m],
            beta,
        }
    }

    pub fn m(&self) -> usize {
        self.w.len()
    }

    pub fn d(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn check(&self) -> Result<()> {
        let m = self.m();
        if self.a.len() != m || self.a.iter().any(|a| a.len() + 1 != m) {
            return Err(Error::Dimension("each a_k must have length m - 1"));
        }
        let d = self.d();
        if self.w.iter().any(|w| w.len() != d) {
            return Err(Error::Dimension("each w_k must have length d"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain("beta must be positive and finite"));
        }
        Ok(())
    }

    /// Coefficient of target `j` in the regression for target `k`; zero on
    /// the diagonal.
    pub fn coupling(&self, k: usize, j: usize) -> f64 {
        match j.cmp(&k) {
            core::cmp::Ordering::Less => self.a[k][j],
            core::cmp::Ordering::Equal => 0.0,
            core::cmp::Ordering::Greater => self.a[k][j - 1],
        }
    }

    /// Dense m x m coupling matrix, row `k` holding the coefficients of
    /// regression `k`. Its transpose is the `A` of the update formulas.
    pub fn coupling_matrix(&self) -> Vec<f64> {
        let m = self.m();
        let mut c = alloc::vec![0.0; m * m];
        for k in 0..m {
            for j in 0..m {
                c[k * m + j] = self.coupling(k, j);
            }
        }
        c
    }

    /// `<w_k, x>` for every target.
    pub fn linear_offsets(&self, x: &[f64]) -> Vec<f64> {
        self.w.iter().map(|w| dot(w, x)).collect()
    }

    pub fn squared_norm(&self) -> f64 {
        self.a.iter().chain(self.w.iter()).map(|v| dot(v, v)).sum()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Order in which the censored entries are visited within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    Cyclic,
    /// Fresh seeded permutation every sweep.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub lambda_reg: f64,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub sweep_order: SweepOrder,
    pub record_trace: bool,
    /// Keep every cross-target coefficient at zero.
    pub hold_cross_zero: bool,
    /// Keep the noise precision fixed at this value instead of updating it.
    pub fixed_beta: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda_reg: 1e-3,
            max_sweeps: 500,
            rel_tol: 1e-8,
            sweep_order: SweepOrder::Cyclic,
            record_trace: true,
            hold_cross_zero: false,
            fixed_beta: None,
        }
    }
}

impl FitConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::Domain("lambda_reg must be a finite nonnegative number"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Domain("max_sweeps must be positive"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Domain("rel_tol must be positive"));
        }
        if let Some(beta) = self.fixed_beta {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::Domain("fixed beta must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Summary of one call to the fitter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitReport {
    /// Objective after each full sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps_run: usize,
    pub converged: bool,
    pub elapsed_seconds: f64,
    /// Set when the noise precision hit its clamp at least once.
    pub beta_clamped: bool,
}

impl FitReport {
    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }
}
