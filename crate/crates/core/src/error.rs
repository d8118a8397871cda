use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad classes of failure, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad arguments or configuration.
    Usage,
    /// Input data that cannot be turned into a valid model.
    Data,
    /// Numerical failure while fitting.
    Solver,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("column `{0}` is not present in the data header")]
    MissingColumn(String),
    #[error("no rows left after removing {dropped} rows with missing values")]
    NoRows { dropped: usize },
    #[error("column `{column}`: {reason}")]
    BadColumn { column: String, reason: String },
    #[error("column `{0}` is constant after encoding")]
    ConstantColumn(String),
    #[error("{rows} rows are not enough for {columns} columns in the {block} block")]
    TooFewRows {
        rows: usize,
        columns: usize,
        block: &'static str,
    },
    #[error("column `{column}` has level `{level}` that was not seen during training")]
    UnseenLevel { column: String, level: String },
    #[error("unknown synthetic example {0} (expected 1 or 2)")]
    UnknownExample(u32),
    #[error("invalid value for {name}: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("sensitive matrix is rank deficient (rank {rank} of {columns}); reduce it to principal components first")]
    RankDeficient { rank: usize, columns: usize },
    #[error("sensitive matrix is degenerate: no principal component above the threshold")]
    DegenerateSensitive,
    #[error("singular system: {0}")]
    Singular(&'static str),
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("degenerate auxiliary regression: {0}")]
    DegenerateRegression(&'static str),
    #[error("individual fairness is undefined because f(alpha_ols) = 0")]
    IndividualFairnessUndefined,
    #[error("{n} rows exceed the exact pairwise limit of {limit} and subsampling is disabled")]
    TooManyPairs { n: usize, limit: usize },
    #[error("constraint does not change sign on [{lo}, {hi}] (values {f_lo}, {f_hi}, target {target})")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
        target: f64,
    },
    #[error("root finder did not converge within {iterations} iterations (last value {last})")]
    NoConvergence { iterations: usize, last: f64 },
    #[error("bound r = {r} is unattainable: the constraint cannot drop below {floor}")]
    Infeasible { r: f64, floor: f64 },
    #[error("constraint is inactive: {0}")]
    Inactive(&'static str),
    #[error("IRLS failed at lambda = {lambda}: {reason}")]
    Irls { lambda: f64, reason: String },
    #[error("constraint is not monotone in lambda between {lo} and {hi}")]
    NonMonotone { lo: f64, hi: f64 },
    #[error("{0}")]
    Unsupported(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            InvalidArgument { .. } | Schema(_) | UnknownExample(_) | Unsupported(_) => {
                ErrorCategory::Usage
            }
            Io { .. }
            | Csv(_)
            | Json(_)
            | MissingColumn(_)
            | NoRows { .. }
            | BadColumn { .. }
            | ConstantColumn(_)
            | TooFewRows { .. }
            | UnseenLevel { .. }
            | TooManyPairs { .. } => ErrorCategory::Data,
            RankDeficient { .. }
            | DegenerateSensitive
            | Singular(_)
            | ZeroDenominator(_)
            | DegenerateRegression(_)
            | IndividualFairnessUndefined
            | NoSignChange { .. }
            | NoConvergence { .. }
            | Infeasible { .. }
            | Inactive(_)
            | Irls { .. }
            | NonMonotone { .. } => ErrorCategory::Solver,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
