// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("slot {slot} out of range for {n_slots} slots")]
    SlotOutOfRange { slot: usize, n_slots: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("matrix is not hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("expected {expected} hyperfine site(s), configuration has {got}")]
    WrongSiteCount { expected: usize, got: usize },

    #[error("no level matches {0}")]
    TargetNotInSpectrum(String),

    #[error("target levels {from} and {to} are degenerate")]
    DegenerateTarget { from: String, to: String },

    #[error("transition {from} -> {to} is forbidden for the current coupling configuration")]
    ForbiddenTransition { from: String, to: String },

    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn at_step(self, index: usize) -> Self {
        Error::Step {
            index,
            source: Box::new(self),
        }
    }

    /// Errors caused by the caller's inputs rather than by a failed run.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidParameter(_)
            | Error::WrongSiteCount { .. }
            | Error::SlotOutOfRange { .. }
            | Error::InvalidPartition(_) => true,
            Error::Step { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
