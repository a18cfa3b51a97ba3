//! File formats, evaluation harness and command line for multi-target Tobit
//! regression on censored tables. The numerics live in `mttm-core`.

// `!(x < y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod clock;
pub mod harness;
pub mod model_file;
pub mod table;

pub use clock::SystemClock;
