use thiserror::Error;

use crate::moments::FactorProfile;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid count series: {0}")]
    InvalidSeries(String),

    #[error("invalid latent specification: {0}")]
    InvalidSpec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("transition matrix has no unique stationary distribution: {0}")]
    NonStationary(String),

    #[error("design matrix is rank deficient (rank {rank} < {columns} columns)")]
    RankDeficient { rank: usize, columns: usize },

    #[error("no positive counts: the Poisson mean is not identifiable")]
    NoPositiveCounts,

    #[error("optimizer did not converge after {iterations} iterations (gradient sup-norm {gradient_norm:.3e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },

    #[error("estimates diverged: {0}")]
    Divergence(String),

    #[error("all {starts} multistart runs failed: {last}")]
    AllStartsFailed { starts: usize, last: String },

    #[error("wrong model for this operation: expected {expected}, got {found}")]
    WrongModel { expected: &'static str, found: String },

    #[error("Hessian estimate is singular (eigenvalue {eigenvalue:.3e})")]
    SingularHessian { eigenvalue: f64 },

    #[error("robust covariance has a negative diagonal entry at index {index} ({value:.3e})")]
    NegativeVariance { index: usize, value: f64 },

    #[error("score sums are not near zero (sup-norm {norm:.3e}); the estimate is not a stationary point")]
    NotAtOptimum { norm: f64 },

    #[error("lag truncation {ell} is not below n^(1/3) for n = {n}")]
    InvalidLag { ell: usize, n: usize },

    #[error("calibration target is infeasible: {reason}")]
    Infeasible { reason: String, closest: Box<FactorProfile> },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("too little data: n = {n}, need at least {required}")]
    InsufficientData { n: usize, required: usize },

    #[error("convergence rate for {estimator} is {rate:.3}, below 0.5")]
    LowConvergence { estimator: String, rate: f64 },

    #[error("invalid study design: {0}")]
    InvalidDesign(String),

    #[error("CSV input has no `y` column")]
    MissingCountColumn,

    #[error("row {row}: count `{value}` is not a non-negative integer")]
    NonIntegerCount { row: usize, value: String },

    #[error("row {row}: count {value} is negative")]
    NegativeCount { row: usize, value: String },

    #[error("row {row}, column `{column}`: `{value}` is not a finite number")]
    NotANumber { row: usize, column: String, value: String },

    #[error("CSV input has {rows} data rows, need at least 2")]
    TooFewRows { rows: usize },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
