use thiserror::Error;

use crate::markov::Violation;

/// Errors returned by estimation, simulation and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate distribution: all weights are zero")]
    DegenerateWeights,
    #[error("Cholesky decomposition failed at pivot {pivot}")]
    CholeskyFailure { pivot: usize },
    #[error("invalid transition matrix: {0}")]
    InvalidMatrix(Violation),
    #[error("matrix structure error: {0}")]
    Structure(String),
    /// `state` is 0-based; the message shows the 1-based label.
    #[error("state s{} is not absorbing or some transient state cannot reach it", state + 1)]
    NonAbsorbing { state: usize },
    #[error("panel has missing entries; complete data required")]
    IncompleteData,
    #[error("observed transition s{from}->s{to} is forbidden by the support mask")]
    InconsistentCounts { from: usize, to: usize },
    #[error("no state is compatible with the neighbours of individual {} at t={time}", individual + 1)]
    ImputationImpossible { individual: usize, time: usize },
    #[error("could not complete the sequence of individual {} consistently with its observations", individual + 1)]
    InitializationFailed { individual: usize },
    #[error("s{} is observed at t={time} but cannot be reached from p0 under the support", state + 1)]
    Unreachable { state: usize, time: usize },
    #[error("chain state has zero posterior density")]
    InvalidChainState,
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("state label out of range at line {line}: {message}")]
    Domain { line: u64, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("RRA rejection sampler exceeded {0} retries")]
    RejectionExhausted(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures caused by the numerics rather than inputs or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CholeskyFailure { .. }
                | Error::DegenerateWeights
                | Error::InvalidChainState
                | Error::RejectionExhausted(_)
        )
    }

    /// True for failures attributable to input data files or their contents.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Domain { .. }
                | Error::IncompleteData
                | Error::InconsistentCounts { .. }
                | Error::Unreachable { .. }
                | Error::ImputationImpossible { .. }
                | Error::InitializationFailed { .. }
                | Error::InvalidMatrix(_)
                | Error::Structure(_)
                | Error::NonAbsorbing { .. }
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
