//! Completion of censored tables and structural prediction for new rows.

use alloc::vec::Vec;

use crate::ascent::{fit, AscentWorkspace};
use crate::error::{Error, Result};
use crate::linalg::lu_solve;
use crate::model::{dot, Dataset, FitConfig, FitReport, ModelParams, TargetEntry};
use crate::variational::VariationalState;

/// Result of [`impute`]: the completed m x n table (target-major), the
/// fitted parameters and the fit report.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    pub completed: Vec<f64>,
    pub params: ModelParams,
    pub report: FitReport,
    pub q: VariationalState,
}

impl Imputation {
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.completed[k * self.q.n() + i]
    }
}

/// Fits the model and replaces every censored cell by its posterior mean.
/// Observed cells are copied bit for bit.
pub fn impute(data: &Dataset, config: &FitConfig) -> Result<Imputation> {
    let outcome = fit(data, config)?;
    Ok(Imputation {
        completed: completed_values(data, &outcome.q),
        params: outcome.params,
        report: outcome.report,
        q: outcome.q,
    })
}

/// Observed values where present, posterior means elsewhere.
pub fn completed_values(data: &Dataset, q: &VariationalState) -> Vec<f64> {
    data.entries()
        .iter()
        .zip(q.entries())
        .map(|(entry, qe)| match *entry {
            TargetEntry::Observed(v) => v,
            TargetEntry::Censored(_) => qe.mean(),
        })
        .collect()
}

/// Posterior densities for a table under fixed parameters: density sweeps
/// only, until no mean moves by more than `tol * (1 + |mean|)` or
/// `max_sweeps` is reached.
pub fn posterior_given_params(
    data: &Dataset,
    params: &ModelParams,
    config: &FitConfig,
    tol: f64,
) -> Result<VariationalState> {
    let mut ws = AscentWorkspace::with_params(data, config.clone(), params.clone())?;
    for sweep in 1..=config.max_sweeps {
        let before = ws.q().means();
        ws.q_sweep().map_err(|e| e.at_sweep(sweep))?;
        let moved = ws
            .q()
            .means()
            .iter()
            .zip(&before)
            .any(|(now, was)| libm::fabs(now - was) > tol * (1.0 + libm::fabs(*now)));
        if !moved {
            break;
        }
    }
    Ok(ws.into_parts().1)
}

/// Completes a table with an already-fitted model.
pub fn impute_with_params(data: &Dataset, params: &ModelParams, config: &FitConfig) -> Result<Vec<f64>> {
    let q = posterior_given_params(data, params, config, config.rel_tol)?;
    Ok(completed_values(data, &q))
}

/// Zero-noise solution of the coupled regressions for the unknown targets,
/// with known targets held at their values. Censoring is ignored.
pub fn predict(params: &ModelParams, x: &[f64], known: &[Option<f64>]) -> Result<Vec<f64>> {
    params.check()?;
    let m = params.m();
    if x.len() != params.d() {
        return Err(Error::Dimension("x must have length d"));
    }
    if known.len() != m {
        return Err(Error::Dimension("known targets must have length m"));
    }
    let unknown: Vec<usize> = (0..m).filter(|&k| known[k].is_none()).collect();
    if unknown.is_empty() {
        return Err(Error::Domain("at most m - 1 targets may be known"));
    }
    let u = unknown.len();
    // (I - C)_uu y_u = W_u x + C_uk y_k
    let mut lhs = alloc::vec![0.0; u * u];
    let mut rhs = alloc::vec![0.0; u];
    for (r, &k) in unknown.iter().enumerate() {
        rhs[r] = dot(&params.w[k], x);
        for (j, value) in known.iter().enumerate() {
            if let Some(v) = value {
                rhs[r] += params.coupling(k, j) * v;
            }
        }
        for (s, &j) in unknown.iter().enumerate() {
            lhs[r * u + s] = if j == k { 1.0 } else { 0.0 } - params.coupling(k, j);
        }
    }
    let solved = lu_solve(&lhs, &rhs, u).ok_or(Error::SingularSystem { target: unknown[0] })?;
    let mut out: Vec<f64> = known.iter().map(|v| v.unwrap_or(0.0)).collect();
    for (r, &k) in unknown.iter().enumerate() {
        out[k] = solved[r];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn decoupled_prediction_is_linear() {
        let params = ModelParams {
            a: vec![vec![0.0], vec![0.0]],
            w: vec![vec![1.0, 2.0], vec![-1.0, 0.5]],
            beta: 1.0,
        };
        let y = predict(&params, &[1.0, 1.0], &[None, None]).unwrap();
        assert_eq!(y, vec![3.0, -0.5]);
    }

    #[test]
    fn homogeneous_system_has_zero_solution() {
        let params = ModelParams {
            a: vec![vec![0.5], vec![0.5]],
            w: vec![vec![0.0], vec![0.0]],
            beta: 1.0,
        };
        assert_eq!(predict(&params, &[1.0], &[None, None]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn unit_coupling_is_singular() {
        let params = ModelParams {
            a: vec![vec![1.0], vec![1.0]],
            w: vec![vec![0.0], vec![0.0]],
            beta: 1.0,
        };
        assert!(matches!(
            predict(&params, &[1.0], &[None, None]),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn known_targets_pass_through() {
        let params = ModelParams {
            a: vec![vec![0.5], vec![0.25]],
            w: vec![vec![1.0], vec![2.0]],
            beta: 1.0,
        };
        let y = predict(&params, &[1.0], &[Some(4.0), None]).unwrap();
        assert_eq!(y[0], 4.0);
        assert!((y[1] - (2.0 + 0.25 * 4.0)).abs() < 1e-15);
        assert!(predict(&params, &[1.0], &[Some(1.0), Some(2.0)]).is_err());
    }
}
