//! Multi-target Tobit regression.
//!
//! Each of `m` target columns is regressed on the other targets and on `d`
//! features, with Gaussian noise of shared precision. Target cells may be
//! censored to a window `[lower, upper]` (either side possibly infinite).
//! Fitting maximizes a variational lower bound by block coordinate ascent in
//! which every block update is closed form; censored cells are imputed with
//! the resulting truncated-normal means. With `m = 1` the model is ordinary
//! Tobit regression and the bound is tight at the optimum.
//!
//! ```
//! use mttm_core::{impute, CensoringBound, Dataset, FitConfig, TargetEntry};
//!
//! let x: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64 / 10.0]).collect();
//! let y: Vec<TargetEntry> = (0..20)
//!     .map(|i| {
//!         let v = 0.5 + (i as f64) / 10.0 + if i % 2 == 0 { 0.1 } else { -0.1 };
//!         if v < 0.8 {
//!             TargetEntry::Censored(CensoringBound::below(0.8))
//!         } else {
//!             TargetEntry::Observed(v)
//!         }
//!     })
//!     .collect();
//! let data = Dataset::new(x, vec![y]).unwrap();
//! let out = impute(&data, &FitConfig::default()).unwrap();
//! assert!(out.value(0, 0) < 0.8);
//! ```
//!
//! The crate is `no_std` (with `alloc`); IO, timing and the command line
//! live in the `mttm` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod ascent;
pub mod error;
pub mod impute;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod special;
pub mod truncnorm;
pub mod variational;

pub use ascent::{
    fit, fit_with_clock, sttm_design, sttm_fit, AscentWorkspace, Clock, FillPolicy, FitOutcome, NoClock, SttmFit,
    BETA_MAX, BETA_MIN,
};
pub use error::{Error, Result};
pub use impute::{completed_values, impute, impute_with_params, posterior_given_params, predict, Imputation};
pub use model::{
    CensoringBound, Dataset, FitConfig, FitReport, ModelParams, SweepOrder, TargetEntry, ValidationReport, Violation,
    Warning,
};
pub use objective::{eval_f_m, eval_f_s, eval_l_s, regularizer};
pub use truncnorm::{
    tn_entropy, tn_log_normalizer, tn_mean, tn_second_moment, tn_variance, TnMoments, TruncatedNormal,
};
pub use variational::{QEntry, TnEntry, VariationalState};
