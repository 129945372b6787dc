//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors returned by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A series or aggregate name appears more than once.
    #[error("duplicate name '{0}' in hierarchy")]
    DuplicateName(String),

    /// An aggregate references a name that is neither a bottom nor an aggregate.
    #[error("aggregate '{aggregate}' references unknown child '{child}'")]
    UnknownChild {
        /// Aggregate whose child list is invalid.
        aggregate: String,
        /// The unresolved child name.
        child: String,
    },

    /// Aggregate references form a cycle.
    #[error("cyclic aggregate reference involving '{0}'")]
    CyclicAggregate(String),

    /// A bottom series would be counted more than once in an aggregate.
    #[error("aggregate '{aggregate}' counts bottom '{bottom}' more than once")]
    DuplicateContribution {
        /// Aggregate whose expansion is invalid.
        aggregate: String,
        /// Bottom series contributing with multiplicity > 1.
        bottom: String,
    },

    /// The hierarchy has no bottom series.
    #[error("hierarchy must declare at least one bottom series")]
    EmptyBottoms,

    /// An aggregate expands to no bottom series.
    #[error("aggregate '{0}' expands to no bottom series")]
    EmptyAggregate(String),

    /// Matrix or vector dimensions do not line up.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch {
        /// What was expected.
        expected: String,
        /// What was provided.
        actual: String,
    },

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Covariance estimation needs at least two residual rows.
    #[error("need at least 2 residual rows, got {0}")]
    TooFewResiduals(usize),

    /// A matrix expected to be symmetric is not, within tolerance.
    #[error("{what} is not symmetric (max asymmetry {max_asymmetry:.3e})")]
    NotSymmetric {
        /// Which matrix failed the check.
        what: String,
        /// Largest |a_ij - a_ji| observed.
        max_asymmetry: f64,
    },

    /// A matrix required to be positive definite could not be factorized.
    #[error("{what} is not positive definite (condition estimate {condition:.3e})")]
    NotPositiveDefinite {
        /// Which matrix failed the factorization.
        what: String,
        /// Ratio of extreme eigenvalue magnitudes (inf if exactly singular).
        condition: f64,
    },

    /// A covariance matrix has an eigenvalue too negative to repair.
    #[error("{what} is not positive semi-definite (eigenvalue {eigenvalue:.3e})")]
    NotPositiveSemiDefinite {
        /// Which matrix failed the check.
        what: String,
        /// The offending eigenvalue.
        eigenvalue: f64,
    },

    /// A series is too short for the requested model order.
    #[error("series of length {len} is too short for AR({order}) (need at least {min})")]
    SeriesTooShort {
        /// Observed length.
        len: usize,
        /// Requested autoregressive order.
        order: usize,
        /// Minimum admissible length.
        min: usize,
    },

    /// A required series is missing from an input file.
    #[error("missing series '{0}'")]
    MissingSeries(String),

    /// A (series, horizon) pair appears more than once in a forecast file.
    #[error("duplicate forecast entry for series '{series}' at h={h}")]
    DuplicateForecast {
        /// Series name.
        series: String,
        /// Forecast horizon.
        h: usize,
    },

    /// Forecast horizons are not the same 1..=H range for every series.
    #[error("inconsistent horizons for series '{0}': expected one mean per h in 1..=H")]
    InconsistentHorizon(String),

    /// Failure inside one experiment replicate.
    #[error("replicate {index}: {source}")]
    Replicate {
        /// Replicate index.
        index: usize,
        /// Underlying failure.
        source: Box<Error>,
    },

    /// Malformed input file content.
    #[error("parse error in {file}: {message}")]
    Parse {
        /// File (or stream description) being parsed.
        file: String,
        /// What went wrong.
        message: String,
    },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV-level failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// JSON-level failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical linear algebra (as opposed to
    /// input validation); the CLI maps these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. } | Error::NotPositiveSemiDefinite { .. } => true,
            Error::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
