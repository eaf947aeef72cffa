use thiserror::Error;

/// Errors raised across the crate.
///
/// Conditions that the numerical routines can recover from (rank deficiency,
/// degenerate geometry, sparse histograms) are reported as flags on the
/// returned values instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("reference covariance is rank deficient")]
    SingularReference,
    #[error("both vectors are zero; the plane is undefined")]
    BothZero,
    #[error("sector half-angle {0} is not below pi/2")]
    PhiTooLarge(f64),
    #[error("sectors {0} and {1} are not strictly nested")]
    NotNested(usize, usize),
    #[error("no rows with an observed sensitive attribute")]
    EmptyUncertainSet,
    #[error("group {0} has no members")]
    MissingGroup(&'static str),
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called without a cached forward pass")]
    NoForwardCache,
    #[error("non-finite value during training at epoch {epoch}: {what}")]
    NonFiniteLoss { epoch: usize, what: String },
    #[error("evaluation requires the true sensitive attribute for every row")]
    MissingTrueSensitive,
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
