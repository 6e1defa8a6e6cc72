use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("invalid spectral box: lower bound {lo} exceeds upper bound {hi}")]
    InvalidBox { lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("label column must be binary, found {0} distinct values")]
    NonBinaryLabel(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid cluster count k={k} for {n} points")]
    InvalidK { k: usize, n: usize },
    #[error("model has zero weights: no decision boundary")]
    NoDecisionBoundary,
    #[error("pointwise map cannot be applied to points outside its fitting group")]
    NotGeneralizable,
    #[error("covariance is singular beyond regularization")]
    SingularCovariance,
    #[error("unsupported constraint: {0}")]
    UnsupportedConstraint(String),
    #[error("bi-Lipschitz bounds undefined: every input pair is degenerate")]
    UndefinedBounds,
    #[error("mixture component {0} stayed empty after re-seeding")]
    EmptyComponent(usize),
    #[error("not enough samples: {0}")]
    NotEnoughSamples(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
