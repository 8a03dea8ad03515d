use std::path::PathBuf;

use thiserror::Error;

/// Coarse error category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad flags or configuration values (exit 2).
    Usage,
    /// Malformed or inconsistent input data (exit 3).
    Data,
    /// Numerical failure, e.g. quadrature non-convergence (exit 4).
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("bad header: expected `{expected}`, got `{got}`")]
    BadHeader { expected: String, got: String },

    #[error("non-positive value for point `{point_id}`, year {year}: {value}")]
    NonPositiveValue {
        point_id: String,
        year: i32,
        value: f64,
    },

    #[error("non-finite value for point `{point_id}`, year {year}")]
    NonFiniteValue { point_id: String, year: i32 },

    #[error("duplicate observation for point `{point_id}`, year {year}")]
    DuplicateObservation { point_id: String, year: i32 },

    #[error("ragged series: point `{point_id}` has {got} years, expected {expected}")]
    RaggedSeries {
        point_id: String,
        expected: usize,
        got: usize,
    },

    #[error("point `{point_id}` does not share the common time index")]
    MismatchedTimeIndex { point_id: String },

    #[error("invalid series `{point_id}`: {reason}")]
    InvalidSeries { point_id: String, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {min} observations, got {got}")]
    TooFewObservations { min: usize, got: usize },

    #[error("zero or overflowing series mean: {mean}")]
    BadMean { mean: f64 },

    #[error("scale constant must be positive and finite, got {c}")]
    InvalidScale { c: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("shape parameters must match, got xi1 = {xi1}, xi2 = {xi2}")]
    ShapeMismatch { xi1: f64, xi2: f64 },

    #[error("quadrature did not converge within {subdivisions} subdivisions")]
    QuadratureNonConvergence { subdivisions: usize },

    #[error("invalid dissimilarity matrix: {0}")]
    InvalidMatrix(String),

    #[error("k = {k} out of range for {p} points")]
    InvalidK { k: usize, p: usize },

    #[error("partitions are incompatible: {0}")]
    IncompatiblePartitions(String),

    #[error("label alignment supports k <= {max}, got k = {k}")]
    AlignmentTooLarge { k: usize, max: usize },

    #[error("pair ({i}, {j}) [`{id_i}`, `{id_j}`] failed: {source}")]
    PairFailure {
        i: usize,
        j: usize,
        id_i: String,
        id_j: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            InvalidConfig(_) | InvalidScale { .. } | InvalidK { .. } | AlignmentTooLarge { .. }
            | Domain(_) | ShapeMismatch { .. } => ErrorKind::Usage,
            QuadratureNonConvergence { .. } => ErrorKind::Numeric,
            PairFailure { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
