//! Block coordinate ascent on the multi-target objective.
//!
//! One sweep visits every censored entry once, replacing its density with
//! the exact maximizer (a truncated normal), and then replaces all model
//! parameters with their exact joint maximizer. Both steps are closed form,
//! so the objective is non-decreasing step by step.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::model::{dot, Dataset, FitConfig, FitReport, ModelParams, SweepOrder, TargetEntry};
use crate::objective::{entropy_sum, expected_log_lik, regularizer};
use crate::variational::{QEntry, TnEntry, VariationalState};

/// Noise precision is kept inside `[BETA_MIN, BETA_MAX]`.
pub const BETA_MIN: f64 = 1e-12;
pub const BETA_MAX: f64 = 1e12;

/// Floor on the initial mean squared residual.
const INIT_MSR_FLOOR: f64 = 1e-8;
/// Relative ridge added to the initial regressions so they never fail.
const INIT_JITTER: f64 = 1e-8;

/// Wall-clock source; the core crate has none of its own.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Reports zero elapsed time.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// Mutable state of one fit: parameters, densities and the cached coupling
/// matrix (row `k` holds the coefficients of regression `k`, zero diagonal).
#[derive(Debug, Clone)]
pub struct AscentWorkspace<'a> {
    data: &'a Dataset,
    config: FitConfig,
    params: ModelParams,
    coupling: Vec<f64>,
    q: VariationalState,
    hidden: Vec<(usize, usize)>,
    rng: ChaCha8Rng,
    beta_clamped: bool,
}

impl<'a> AscentWorkspace<'a> {
    /// Validates inputs and initializes: censored cells filled at their
    /// nearest finite bound, one ridge regression per target on the filled
    /// table, precision from the mean squared residual, then one sweep of
    /// density updates.
    pub fn new(data: &'a Dataset, config: FitConfig) -> Result<Self> {
        config.check()?;
        data.require_valid()?;
        let params = initial_params(data, &config)?;
        let mut ws = Self::with_params(data, config, params)?;
        ws.q_sweep()?;
        Ok(ws)
    }

    /// Workspace at given parameters; censored densities start as
    /// `TN(fill, beta^-1/2, bound)` and are not yet optimized.
    pub fn with_params(data: &'a Dataset, config: FitConfig, params: ModelParams) -> Result<Self> {
        config.check()?;
        data.require_valid()?;
        params.check()?;
        if params.m() != data.m() || params.d() != data.d() {
            return Err(Error::Dimension("parameters do not match the dataset"));
        }
        let q = VariationalState::initial(data, 1.0 / libm::sqrt(params.beta))?;
        Self::with_state(data, config, params, q)
    }

    /// Workspace at an explicit `(params, q)` pair.
    pub fn with_state(data: &'a Dataset, config: FitConfig, params: ModelParams, q: VariationalState) -> Result<Self> {
        params.check()?;
        if q.m() != data.m() || q.n() != data.n() {
            return Err(Error::Dimension("variational state does not match the dataset"));
        }
        let seed = match config.sweep_order {
            SweepOrder::Random(seed) => seed,
            SweepOrder::Cyclic => 0,
        };
        let mut params = params;
        if config.hold_cross_zero {
            params.a.iter_mut().flatten().for_each(|a| *a = 0.0);
        }
        if let Some(beta) = config.fixed_beta {
            params.beta = beta;
        }
        Ok(AscentWorkspace {
            data,
            coupling: params.coupling_matrix(),
            params,
            q,
            hidden: data.hidden_indices(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            beta_clamped: false,
            config,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn q(&self) -> &VariationalState {
        &self.q
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn beta_clamped(&self) -> bool {
        self.beta_clamped
    }

    /// Censored entries in the order a cyclic sweep visits them.
    pub fn hidden(&self) -> &[(usize, usize)] {
        &self.hidden
    }

    pub fn into_parts(self) -> (ModelParams, VariationalState) {
        (self.params, self.q)
    }

    /// Current value of the regularized objective.
    pub fn objective(&self) -> f64 {
        expected_log_lik(&self.params, &self.coupling, &self.q, self.data) + entropy_sum(&self.q)
            - regularizer(&self.params, self.config.lambda_reg)
    }

    /// Exact maximizer of the objective over `q_{k,i}` alone.
    ///
    /// Per row `j` of the coupling matrix `C`, the residual of regression `j` is
    /// `b_j t_k + s_j - c_j`, where `b_j = [j == k] - C[j][k]`,
    /// `s_j` collects the other targets' means and `c_j = <w_j, x_i>`.
    /// Completing the square gives `mu = <b, c - s> / |b|^2` and
    /// `sigma = 1 / (sqrt(beta) |b|)`.
    pub fn q_update(&mut self, k: usize, i: usize) -> Result<TnEntry> {
        if !matches!(self.q.get(k, i), QEntry::TruncNorm(_)) {
            return Err(Error::NotCensored { target: k, example: i });
        }
        let (mu, sigma) = self.q_optimum(k, i)?;
        self.q.set_truncated(k, i, mu, sigma)
    }

    /// Location and scale of the optimal density for `(k, i)` without
    /// applying it.
    pub fn q_optimum(&self, k: usize, i: usize) -> Result<(f64, f64)> {
        let m = self.data.m();
        let x = self.data.x_row(i);
        let c = &self.coupling;
        let mut num = 0.0;
        let mut norm_sq = 0.0;
        for j in 0..m {
            let row = &c[j * m..(j + 1) * m];
            let b_j = if j == k { 1.0 } else { 0.0 } - row[k];
            if b_j == 0.0 {
                continue;
            }
            let mut s_j = 0.0;
            for (l, &c_jl) in row.iter().enumerate() {
                if l == k {
                    continue;
                }
                let coeff = if l == j { 1.0 } else { 0.0 } - c_jl;
                s_j += coeff * self.q.mean(l, i);
            }
            let c_j = dot(&self.params.w[j], x);
            num += b_j * (c_j - s_j);
            norm_sq += b_j * b_j;
        }
        if !(norm_sq > 0.0 && norm_sq.is_finite() && num.is_finite()) {
            return Err(Error::DegenerateUpdate { target: k, example: i });
        }
        let mu = num / norm_sq;
        let sigma = 1.0 / (libm::sqrt(self.params.beta) * libm::sqrt(norm_sq));
        Ok((mu, sigma))
    }

    /// One pass of density updates over every censored entry, in the
    /// configured order.
    pub fn q_sweep(&mut self) -> Result<()> {
        let order = self.sweep_order();
        for (k, i) in order {
            self.q_update(k, i)?;
        }
        Ok(())
    }

    fn sweep_order(&mut self) -> Vec<(usize, usize)> {
        let mut order = self.hidden.clone();
        if let SweepOrder::Random(_) = self.config.sweep_order {
            order.shuffle(&mut self.rng);
        }
        order
    }

    /// Exact joint maximizer over all coefficients and the precision with
    /// `q` frozen.
    ///
    /// For each target the coefficients solve the ridge system
    /// `(G_k + sum_i xt xt^T) wt = sum_i ybar_k xt` with
    /// `xt = [ybar_\k; x]` and `G_k = diag(sum_i Var_\k; 0) + lambda I`;
    /// the precision is then `mn` over the total expected squared residual
    /// plus `lambda |wt|^2`.
    pub fn theta_update(&mut self) -> Result<&ModelParams> {
        let data = self.data;
        let (m, n, d) = (data.m(), data.n(), data.d());
        let lambda = self.config.lambda_reg;
        let cross = if self.config.hold_cross_zero { 0 } else { m - 1 };
        let p = cross + d;
        let mut total_sq = 0.0;
        let mut new_a = Vec::with_capacity(m);
        let mut new_w = Vec::with_capacity(m);
        let mut xt = alloc::vec![0.0; p];
        for k in 0..m {
            let others: Vec<usize> = (0..m).filter(|&j| j != k).collect();
            let mut gram = alloc::vec![0.0; p * p];
            let mut rhs = alloc::vec![0.0; p];
            let mut var_sums = alloc::vec![0.0; cross];
            let mut own_var = 0.0;
            for i in 0..n {
                fill_design(&mut xt, &self.q, &others[..cross], i, data.x_row(i));
                let target = self.q.get(k, i);
                let y = target.mean();
                own_var += target.variance();
                for r in 0..p {
                    rhs[r] += y * xt[r];
                    for s in 0..=r {
                        gram[r * p + s] += xt[r] * xt[s];
                    }
                }
                for (slot, &j) in var_sums.iter_mut().zip(&others[..cross]) {
                    *slot += self.q.get(j, i).variance();
                }
            }
            for r in 0..p {
                for s in 0..r {
                    gram[s * p + r] = gram[r * p + s];
                }
                gram[r * p + r] += lambda;
            }
            for (r, v) in var_sums.iter().enumerate() {
                gram[r * p + r] += v;
            }
            let coef = cholesky_solve(&gram, &rhs, p).ok_or(Error::SingularSystem { target: k })?;
            // Direct residuals rather than yy - coef.rhs, which cancels badly
            // when the fit is nearly exact.
            let mut fit_sq = lambda * dot(&coef, &coef);
            for (r, v) in var_sums.iter().enumerate() {
                fit_sq += coef[r] * coef[r] * v;
            }
            for i in 0..n {
                fill_design(&mut xt, &self.q, &others[..cross], i, data.x_row(i));
                let resid = self.q.mean(k, i) - dot(&coef, &xt);
                fit_sq += resid * resid;
            }
            total_sq += fit_sq + own_var;
            let mut a_k = alloc::vec![0.0; m - 1];
            a_k[..cross].copy_from_slice(&coef[..cross]);
            new_a.push(a_k);
            new_w.push(coef[cross..].to_vec());
        }
        self.params.a = new_a;
        self.params.w = new_w;
        if self.config.fixed_beta.is_none() {
            let raw = (m * n) as f64 / total_sq;
            let beta = if raw.is_nan() {
                BETA_MAX
            } else {
                raw.clamp(BETA_MIN, BETA_MAX)
            };
            if beta != raw {
                self.beta_clamped = true;
            }
            self.params.beta = beta;
        }
        self.coupling = self.params.coupling_matrix();
        Ok(&self.params)
    }

    /// Density sweep followed by a parameter update. Returns the objective.
    pub fn sweep(&mut self) -> Result<f64> {
        self.q_sweep()?;
        self.theta_update()?;
        Ok(self.objective())
    }
}

fn fill_design(xt: &mut [f64], q: &VariationalState, others: &[usize], i: usize, x: &[f64]) {
    for (slot, &j) in xt.iter_mut().zip(others) {
        *slot = q.mean(j, i);
    }
    xt[others.len()..].copy_from_slice(x);
}

/// Ridge fit per target on the bound-filled table.
fn initial_params(data: &Dataset, config: &FitConfig) -> Result<ModelParams> {
    let (m, n, d) = (data.m(), data.n(), data.d());
    let filled: Vec<f64> = data
        .entries()
        .iter()
        .map(|e| match *e {
            TargetEntry::Observed(v) => v,
            TargetEntry::Censored(b) => b.nearest_finite(),
        })
        .collect();
    let cross = if config.hold_cross_zero { 0 } else { m - 1 };
    let p = cross + d;
    let mut params = ModelParams::zeros(m, d, 1.0);
    let mut total_sq = 0.0;
    let mut xt = alloc::vec![0.0; p];
    for k in 0..m {
        let others: Vec<usize> = (0..m).filter(|&j| j != k).take(cross).collect();
        let mut gram = alloc::vec![0.0; p * p];
        let mut rhs = alloc::vec![0.0; p];
        for i in 0..n {
            for (slot, &j) in xt.iter_mut().zip(&others) {
                *slot = filled[j * n + i];
            }
            xt[cross..].copy_from_slice(data.x_row(i));
            let y = filled[k * n + i];
            for r in 0..p {
                rhs[r] += y * xt[r];
                for s in 0..p {
                    gram[r * p + s] += xt[r] * xt[s];
                }
            }
        }
        let scale = (0..p).map(|r| gram[r * p + r]).fold(0.0, f64::max).max(1.0);
        let ridge = config.lambda_reg.max(INIT_JITTER * scale);
        for r in 0..p {
            gram[r * p + r] += ridge;
        }
        let coef = cholesky_solve(&gram, &rhs, p).ok_or(Error::SingularSystem { target: k })?;
        for i in 0..n {
            for (slot, &j) in xt.iter_mut().zip(&others) {
                *slot = filled[j * n + i];
            }
            xt[cross..].copy_from_slice(data.x_row(i));
            let r = filled[k * n + i] - dot(&coef, &xt);
            total_sq += r * r;
        }
        params.a[k][..cross].copy_from_slice(&coef[..cross]);
        params.w[k] = coef[cross..].to_vec();
    }
    let msr = (total_sq / (m * n) as f64).max(INIT_MSR_FLOOR);
    params.beta = config.fixed_beta.unwrap_or((1.0 / msr).clamp(BETA_MIN, BETA_MAX));
    Ok(params)
}

/// Result of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub params: ModelParams,
    pub q: VariationalState,
    pub report: FitReport,
}

/// Fits the multi-target model (the single-target model when `m = 1`).
///
/// Stops when `|F_t - F_{t-1}| / (1 + |F_t|) < rel_tol` or after
/// `max_sweeps` sweeps. Errors carry the sweep index (0 = initialization).
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<FitOutcome> {
    fit_with_clock(data, config, &NoClock)
}

pub fn fit_with_clock<C: Clock + ?Sized>(data: &Dataset, config: &FitConfig, clock: &C) -> Result<FitOutcome> {
    let start = clock.seconds();
    let mut ws = AscentWorkspace::new(data, config.clone()).map_err(|e| match e {
        Error::InvalidDataset(_) | Error::Domain(_) | Error::Dimension(_) => e,
        other => other.at_sweep(0),
    })?;
    let mut report = FitReport::default();
    let mut prev = ws.objective();
    for sweep in 1..=config.max_sweeps {
        let current = ws.sweep().map_err(|e| e.at_sweep(sweep))?;
        report.sweeps_run = sweep;
        if config.record_trace {
            report.objective_trace.push(current);
        }
        let change = libm::fabs(current - prev) / (1.0 + libm::fabs(current));
        prev = current;
        if change < config.rel_tol {
            report.converged = true;
            break;
        }
    }
    if !config.record_trace {
        report.objective_trace.push(prev);
    }
    report.beta_clamped = ws.beta_clamped();
    report.elapsed_seconds = clock.seconds() - start;
    let (params, q) = ws.into_parts();
    Ok(FitOutcome { params, q, report })
}

/// How censored cells of the non-target rows are filled when they are used
/// as explanatory columns in a single-target fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillPolicy {
    /// The censoring limit itself (midpoint for an interval).
    #[default]
    DetectionLimit,
    HalfDetectionLimit,
    Zero,
}

impl FillPolicy {
    pub fn fill(&self, entry: &TargetEntry) -> f64 {
        match *entry {
            TargetEntry::Observed(v) => v,
            TargetEntry::Censored(b) => match self {
                FillPolicy::DetectionLimit => b.nearest_finite(),
                FillPolicy::HalfDetectionLimit => 0.5 * b.nearest_finite(),
                FillPolicy::Zero => 0.0,
            },
        }
    }
}

/// Single-target fit of one target row against the features plus the
/// other target rows (pre-filled per the policy).
#[derive(Debug, Clone, PartialEq)]
pub struct SttmFit {
    pub params: ModelParams,
    pub q: VariationalState,
    pub report: FitReport,
    /// The augmented one-target dataset that was fitted.
    pub design: Dataset,
}

/// The one-target dataset used by [`sttm_fit`]: features first, then the
/// other targets' filled values as extra columns.
pub fn sttm_design(data: &Dataset, target: usize, policy: FillPolicy) -> Result<Dataset> {
    if target >= data.m() {
        return Err(Error::Dimension("target index out of range"));
    }
    let (n, d, m) = (data.n(), data.d(), data.m());
    let others: Vec<usize> = (0..m).filter(|&j| j != target).collect();
    let width = d + others.len();
    let mut x = Vec::with_capacity(n * width);
    for i in 0..n {
        x.extend_from_slice(data.x_row(i));
        x.extend(others.iter().map(|&j| policy.fill(data.entry(j, i))));
    }
    let y = data.target_row(target).to_vec();
    let mut features: Vec<String> = data.feature_names().to_vec();
    features.extend(others.iter().map(|&j| data.target_names()[j].clone()));
    Dataset::from_flat(n, width, x, 1, y)?.with_names(alloc::vec![data.target_names()[target].clone()], features)
}

pub fn sttm_fit(data: &Dataset, target: usize, policy: FillPolicy, config: &FitConfig) -> Result<SttmFit> {
    let design = sttm_design(data, target, policy)?;
    let outcome = fit(&design, config)?;
    Ok(SttmFit {
        params: outcome.params,
        q: outcome.q,
        report: outcome.report,
        design,
    })
}
