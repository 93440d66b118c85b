use thiserror::Error;

/// Errors produced by the workbench.
#[derive(Debug, Error)]
pub enum HbmError {
    #[error("unsupported dimension {0} (only 2 and 3 are supported)")]
    UnsupportedDimension(usize),

    #[error("basis cutoff {0} is too small (need at least 4)")]
    CutoffTooSmall(usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different domains")]
    DomainMismatch,

    #[error("support function not positive: min h = {min_h:.3e}")]
    NotPositive { min_h: f64 },

    #[error("body not strictly convex: min eigenvalue of D^2 h = {min_eig:.3e}")]
    NotConvex { min_eig: f64 },

    #[error("body is not origin-symmetric (odd coefficient mass {odd_mass:.3e})")]
    NotSymmetric { odd_mass: f64 },

    #[error("test function is not mean-free: integral against dV_K = {mean:.3e}")]
    MeanNotZero { mean: f64 },

    #[error("operation requires dimension {expected}, body has dimension {got}")]
    WrongDimension { expected: usize, got: usize },

    #[error("tuple of extra bodies has length {got}, expected {expected}")]
    TupleLength { expected: usize, got: usize },

    #[error("linear map is singular")]
    SingularMap,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("iteration limit {0} exceeded")]
    MaxIterExceeded(usize),

    #[error("Newton iteration diverged after {iters} steps (residual {residual:.3e})")]
    NewtonDiverged { iters: usize, residual: f64 },

    #[error("Newton step could not keep the body convex after {halvings} halvings")]
    NotConvexDuringIteration { halvings: usize },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("invalid body definition: {0}")]
    InvalidDefinition(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HbmError>;
