//! Objective functions.
//!
//! * [`eval_l_s`]: censored-data log-likelihood of the single-target model.
//! * [`eval_f_s`]: its variational lower bound for a given `q`; equal to
//!   `eval_l_s` when every censored `q_i` is the model's own truncated
//!   posterior.
//! * [`eval_f_m`]: the multi-target surrogate that the block coordinate
//!   ascent maximizes, regularizer included.
//!
//! Because `q` factorizes per entry, every expectation of a squared residual
//! reduces to means and variances:
//!
//! ```text
//! E[(t_k - <a_k, t_\k> - <w_k, x>)^2]
//!     = (ybar_k - <a_k, ybar_\k> - <w_k, x>)^2 + Var_k + sum_j a_kj^2 Var_j
//! ```

use crate::error::{Error, Result};
use crate::model::{dot, Dataset, ModelParams, TargetEntry};
use crate::special::HALF_LN_2PI;
use crate::truncnorm::tn_log_normalizer;
use crate::variational::VariationalState;

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain("beta must be positive and finite"))
    }
}

/// `ln N(.; ., 1/beta)` up to the quadratic term: `0.5 ln beta - 0.5 ln 2pi`.
#[inline]
fn gaussian_log_norm(beta: f64) -> f64 {
    0.5 * libm::log(beta) - HALF_LN_2PI
}

/// Single-target censored log-likelihood at `(w, beta)`.
pub fn eval_l_s(w: &[f64], beta: f64, data: &Dataset) -> Result<f64> {
    check_beta(beta)?;
    if data.m() != 1 {
        return Err(Error::Dimension(
            "single-target likelihood needs exactly one target row",
        ));
    }
    if w.len() != data.d() {
        return Err(Error::Dimension("w must have length d"));
    }
    let sigma = 1.0 / libm::sqrt(beta);
    let mut total = 0.0;
    for i in 0..data.n() {
        let mean = dot(w, data.x_row(i));
        total += match *data.entry(0, i) {
            TargetEntry::Observed(y) => gaussian_log_norm(beta) - 0.5 * beta * (y - mean) * (y - mean),
            TargetEntry::Censored(bound) => tn_log_normalizer(mean, sigma, bound)?,
        };
    }
    Ok(total)
}

/// Single-target variational objective at `(w, beta)` and `q`.
pub fn eval_f_s(w: &[f64], beta: f64, q: &VariationalState, data: &Dataset) -> Result<f64> {
    check_beta(beta)?;
    if data.m() != 1 || q.m() != 1 || q.n() != data.n() {
        return Err(Error::Dimension(
            "single-target objective needs one target row matching q",
        ));
    }
    if w.len() != data.d() {
        return Err(Error::Dimension("w must have length d"));
    }
    let mut total = 0.0;
    for i in 0..data.n() {
        let entry = q.get(0, i);
        let resid = entry.mean() - dot(w, data.x_row(i));
        total += entry.entropy() + gaussian_log_norm(beta) - 0.5 * beta * (resid * resid + entry.variance());
    }
    Ok(total)
}

/// L2 penalty on all regression coefficients. It scales with the noise
/// precision, which is what keeps the joint maximizer over coefficients and
/// precision in closed form.
pub fn regularizer(params: &ModelParams, lambda_reg: f64) -> f64 {
    0.5 * lambda_reg * params.beta * params.squared_norm()
}

/// Multi-target objective: entropies of the censored densities plus the
/// expected log-likelihood of all `m` conditional regressions, minus the
/// regularizer.
pub fn eval_f_m(params: &ModelParams, q: &VariationalState, data: &Dataset, lambda_reg: f64) -> Result<f64> {
    check_beta(params.beta)?;
    params.check()?;
    let m = data.m();
    if params.m() != m || params.d() != data.d() || q.m() != m || q.n() != data.n() {
        return Err(Error::Dimension("parameters, q and data disagree in shape"));
    }
    let coupling = params.coupling_matrix();
    Ok(expected_log_lik(params, &coupling, q, data) + entropy_sum(q) - regularizer(params, lambda_reg))
}

pub(crate) fn entropy_sum(q: &VariationalState) -> f64 {
    q.entries().iter().map(|e| e.entropy()).sum()
}

pub(crate) fn expected_log_lik(params: &ModelParams, coupling: &[f64], q: &VariationalState, data: &Dataset) -> f64 {
    let m = data.m();
    let beta = params.beta;
    let mut means = alloc::vec![0.0; m];
    let mut vars = alloc::vec![0.0; m];
    let mut sq = 0.0;
    for i in 0..data.n() {
        for k in 0..m {
            let e = q.get(k, i);
            means[k] = e.mean();
            vars[k] = e.variance();
        }
        let x = data.x_row(i);
        for k in 0..m {
            let row = &coupling[k * m..(k + 1) * m];
            let mut pred = dot(&params.w[k], x);
            let mut spread = vars[k];
            for j in 0..m {
                pred += row[j] * means[j];
                spread += row[j] * row[j] * vars[j];
            }
            let resid = means[k] - pred;
            sq += resid * resid + spread;
        }
    }
    (m * data.n()) as f64 * gaussian_log_norm(beta) - 0.5 * beta * sq
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CensoringBound;
    use crate::variational::{QEntry, TnEntry};
    use alloc::vec;

    fn one_target(x: Vec<Vec<f64>>, y: Vec<TargetEntry>) -> Dataset {
        Dataset::new(x, vec![y]).unwrap()
    }

    #[test]
    fn gaussian_only_likelihood() {
        let data = one_target(vec![vec![1.0], vec![-2.0]], vec![TargetEntry::Observed(0.0); 2]);
        let l = eval_l_s(&[0.0], 1.0, &data).unwrap();
        assert!((l - 2.0 * -0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn censored_at_the_mean_contributes_log_half() {
        let data = one_target(vec![vec![1.0]], vec![TargetEntry::Censored(CensoringBound::below(0.7))]);
        let l = eval_l_s(&[0.7], 3.0, &data).unwrap();
        assert!((l - libm::log(0.5)).abs() < 1e-15);
    }

    #[test]
    fn censored_two_sigma_below() {
        // <w, x> = 2, beta = 4, u = 1  ->  ln Phi((1 - 2) * 2) = ln Phi(-2)
        let data = one_target(vec![vec![1.0]], vec![TargetEntry::Censored(CensoringBound::below(1.0))]);
        let l = eval_l_s(&[2.0], 4.0, &data).unwrap();
        // 50-digit quadrature
        assert!((l - -3.783_184_333_682_032).abs() < 1e-14);
    }

    #[test]
    fn bad_beta_is_a_domain_error() {
        let data = one_target(vec![vec![1.0]], vec![TargetEntry::Observed(1.0)]);
        assert!(matches!(eval_l_s(&[0.0], 0.0, &data), Err(Error::Domain(_))));
        let q = VariationalState::initial(&data, 1.0).unwrap();
        assert!(matches!(eval_f_s(&[0.0], -1.0, &q, &data), Err(Error::Domain(_))));
    }

    #[test]
    fn all_observed_bound_equals_likelihood() {
        let data = one_target(
            vec![vec![1.0, 0.5], vec![-1.0, 2.0], vec![0.3, 0.3]],
            vec![
                TargetEntry::Observed(0.4),
                TargetEntry::Observed(-1.2),
                TargetEntry::Observed(2.0),
            ],
        );
        let q = VariationalState::initial(&data, 1.0).unwrap();
        let w = [0.2, -0.4];
        assert_eq!(eval_f_s(&w, 1.7, &q, &data).unwrap(), eval_l_s(&w, 1.7, &data).unwrap());
    }

    #[test]
    fn optimal_q_closes_the_gap_and_perturbation_opens_it() {
        let bound = CensoringBound::below(0.1);
        let data = one_target(
            vec![vec![1.0], vec![2.0]],
            vec![TargetEntry::Observed(1.5), TargetEntry::Censored(bound)],
        );
        let (w, beta) = ([0.4], 2.5);
        let sigma = 1.0 / libm::sqrt(beta);
        let star = TnEntry::new(0.8, sigma, bound).unwrap();
        let q = VariationalState::from_entries(1, 2, vec![QEntry::Point(1.5), QEntry::TruncNorm(star)]).unwrap();
        let l = eval_l_s(&w, beta, &data).unwrap();
        let f = eval_f_s(&w, beta, &q, &data).unwrap();
        assert!((l - f).abs() < 1e-10);

        let off = TnEntry::new(0.9, sigma, bound).unwrap();
        let q_off = VariationalState::from_entries(1, 2, vec![QEntry::Point(1.5), QEntry::TruncNorm(off)]).unwrap();
        assert!(eval_f_s(&w, beta, &q_off, &data).unwrap() < l);
    }

    #[test]
    fn multi_target_reduces_to_single_target() {
        let data = one_target(
            vec![vec![1.0, 0.5], vec![-1.0, 2.0]],
            vec![
                TargetEntry::Observed(0.4),
                TargetEntry::Censored(CensoringBound::below(-0.5)),
            ],
        );
        let q = VariationalState::initial(&data, 0.8).unwrap();
        let params = ModelParams {
            a: vec![vec![]],
            w: vec![vec![0.3, -0.1]],
            beta: 1.3,
        };
        let lambda = 0.01;
        let fm = eval_f_m(&params, &q, &data, lambda).unwrap();
        let fs = eval_f_s(&params.w[0], params.beta, &q, &data).unwrap();
        assert!((fm - (fs - regularizer(&params, lambda))).abs() < 1e-12);
    }

    #[test]
    fn fully_observed_multi_target_is_sum_of_gaussians() {
        let y = vec![
            vec![TargetEntry::Observed(1.0), TargetEntry::Observed(0.0)],
            vec![TargetEntry::Observed(-0.5), TargetEntry::Observed(2.0)],
        ];
        let data = Dataset::new(vec![vec![1.0], vec![3.0]], y).unwrap();
        let q = VariationalState::initial(&data, 1.0).unwrap();
        let params = ModelParams {
            a: vec![vec![0.5], vec![-0.25]],
            w: vec![vec![0.1], vec![0.2]],
            beta: 2.0,
        };
        let mut want = 0.0;
        let ys = [[1.0, 0.0], [-0.5, 2.0]];
        let xs = [1.0, 3.0];
        for i in 0..2 {
            let r0 = ys[0][i] - 0.5 * ys[1][i] - 0.1 * xs[i];
            let r1 = ys[1][i] + 0.25 * ys[0][i] - 0.2 * xs[i];
            for r in [r0, r1] {
                want += 0.5 * libm::log(2.0) - HALF_LN_2PI - r * r;
            }
        }
        assert!((eval_f_m(&params, &q, &data, 0.0).unwrap() - want).abs() < 1e-13);
    }
}
