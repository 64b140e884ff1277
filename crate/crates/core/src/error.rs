use std::path::PathBuf;

use thiserror::Error;

use crate::models::ModelKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdKind {
    Species,
    Sample,
}

impl std::fmt::Display for IdKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IdKind::Species => "species",
            IdKind::Sample => "sample",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row {row}: expected {expected} fields, found {found}")]
    Parse {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {col}: {value:?} is not a non-negative integer count")]
    Value {
        row: usize,
        col: usize,
        value: String,
    },

    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: IdKind, id: String },

    #[error("empty table: {0}")]
    EmptyTable(String),

    #[error("sample id {0:?} does not match the sample id rule")]
    IdRule(String),

    #[error("invalid sample id rule: {0}")]
    InvalidIdRule(String),

    #[error("subject {0:?}: no species survives the low-read filter")]
    EmptyRoster(String),

    #[error("community has zero total abundance")]
    ZeroCommunity,

    #[error("invalid abundance vector: {0}")]
    InvalidAbundance(String),

    #[error("species index {index} out of range for {len} species")]
    Index { index: usize, len: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),

    #[error("no finite species dominance value in the subject series")]
    Sentinel,

    #[error("model value is not finite at D = {0}")]
    Eval(f64),

    #[error("operation requires {expected}, got {found}")]
    Kind {
        expected: &'static str,
        found: ModelKind,
    },

    #[error("{kind}: expected {expected} parameters, got {found}")]
    Arity {
        kind: ModelKind,
        expected: usize,
        found: usize,
    },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("{kind}: no start converged (best residual SS {best_ss:e} at {best_params:?})")]
    NonConvergence {
        kind: ModelKind,
        best_ss: f64,
        best_params: Vec<f64>,
    },

    #[error("{kind}: no candidate joint has enough support on both sides")]
    InsufficientSupport { kind: ModelKind },

    #[error("no fits to select from")]
    Selection,

    #[error("trajectory left the finite range at step {step}")]
    Divergence { step: usize },

    #[error("unknown subject {0:?}")]
    UnknownSubject(String),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// True for errors caused by malformed input rather than by the analysis.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Value { .. }
                | Error::DuplicateId { .. }
                | Error::EmptyTable(_)
                | Error::IdRule(_)
                | Error::InvalidIdRule(_)
                | Error::UnknownSubject(_)
                | Error::Io { .. }
        )
    }
}
