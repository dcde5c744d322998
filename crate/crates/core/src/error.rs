use std::io;

use thiserror::Error;

use crate::time::SimTime;

/// Failure that aborts a single simulation run.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("contract violation at {at}: {what}")]
    ContractViolation { at: SimTime, what: String },

    #[error("empty draw interval [{lo}, {hi}]")]
    EmptyInterval { lo: u64, hi: u64 },

    #[error("trace output failed: {0}")]
    Trace(#[from] io::Error),
}

impl SimError {
    pub(crate) fn violation(at: SimTime, what: impl Into<String>) -> Self {
        SimError::ContractViolation {
            at,
            what: what.into(),
        }
    }
}

pub type SimResult<T> = Result<T, SimError>;
