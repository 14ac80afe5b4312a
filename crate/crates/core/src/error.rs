use thiserror::Error;

use crate::reachability::Certificate;

/// Errors raised while building operators or evaluating semigroups.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: zero coefficient stored at column {col}")]
    ZeroCoefficient { row: usize, col: usize },

    #[error("residue {residue}: zero coefficient stored at offset {offset}")]
    ZeroPatternCoefficient { residue: usize, offset: i64 },

    #[error("row {row}: duplicate column {col}")]
    DuplicateColumn { row: usize, col: usize },

    #[error("residue {residue}: duplicate offset {offset}")]
    DuplicateOffset { residue: usize, offset: i64 },

    #[error("row {row}: column index must be >= 1")]
    ColumnOutOfRange { row: usize },

    #[error("n0 must be >= 1")]
    InvalidFirstPeriodicRow,

    #[error("period must be >= 1")]
    InvalidPeriod,

    #[error("pattern has {found} residue classes but period is {period}")]
    PatternLength { period: usize, found: usize },

    #[error("exceptional row {row} is not below n0 = {n0}")]
    ExceptionalRowOutOfRange { row: usize, n0: usize },

    #[error("row and coordinate indices start at 1")]
    ZeroIndex,

    #[error("resource cap exceeded: {what} reached {reached} (cap {cap})")]
    ResourceLimit {
        what: &'static str,
        reached: usize,
        cap: usize,
    },

    #[error("row {row} has infinite forward reachability (positive-weight cycle)")]
    StructuralFailure {
        row: usize,
        certificate: Box<Certificate>,
    },

    #[error("epsilon must be positive")]
    NonPositiveEpsilon,

    #[error("negative time t = {0} (semigroups are indexed by t >= 0)")]
    NegativeTime(String),

    #[error("time must be strictly positive, got {0}")]
    NonPositiveTime(String),

    #[error("cannot parse rational from {0:?}")]
    ParseRational(String),

    #[error("invalid field `{field}`: {message}")]
    InvalidField { field: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
