use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("singular evaluation: division by a jet with constant term {value}")]
    Singular { value: f64 },
    #[error("domain error in {operation}: constant term {value}")]
    Domain { operation: &'static str, value: f64 },
    #[error("jet order exceeded: requested {requested}, available {available}")]
    OrderExceeded { requested: usize, available: usize },
    #[error("dimension mismatch: expected {expected} variables, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("point outside the chart: |x| = {norm} exceeds radius {radius}")]
    ChartDomain { norm: f64, radius: f64 },
    #[error("y = 0 lies on the zero section")]
    SlitViolation,
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid Finsler spec: {0}")]
    InvalidSpec(String),
    #[error("fundamental tensor is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("operation requires a Riemannian family, got {0}")]
    UnsupportedFamily(String),
    #[error("rank {found} where {expected} was required")]
    Rank { expected: usize, found: usize },
    #[error("deformation parameter beta = {0} must exceed 1/2")]
    Feasibility(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
