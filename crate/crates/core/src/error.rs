use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;

use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),

    #[error("invalid dataset: {0}")]
    InvalidDataset(ValidationReport),

    #[error("singular system for target {target}")]
    SingularSystem { target: usize },

    #[error("degenerate q-update for entry ({target}, {example})")]
    DegenerateUpdate { target: usize, example: usize },

    #[error("entry ({target}, {example}) is not censored")]
    NotCensored { target: usize, example: usize },

    #[error("{}", sweep_message(source, *sweep))]
    AtSweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_sweep(self, sweep: usize) -> Self {
        Error::AtSweep {
            sweep,
            source: Box::new(self),
        }
    }

    /// The innermost error, with any sweep context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtSweep { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical kind (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::SingularSystem { .. } | Error::DegenerateUpdate { .. }
        )
    }
}

fn sweep_message(source: &Error, sweep: usize) -> String {
    match source {
        Error::SingularSystem { target } => format!("singular system at sweep {sweep} (target {target})"),
        other => format!("{other} at sweep {sweep}"),
    }
}

pub type Result<T> = core::result::Result<T, Error>;
