use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not antisymmetric (defect {defect:.3e})")]
    NotAntisymmetric { defect: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("matrix has odd dimension {0}")]
    OddDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Darboux factorization residual {residual:.3e} exceeds tolerance")]
    FactorizationFailed { residual: f64 },
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symplectic (defect {defect:.3e})")]
    NotSymplectic { defect: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("{points} grid points exceed the cap of {cap}")]
    GridCapExceeded { points: usize, cap: usize },
    #[error("resampling error estimate {estimate:.3e} exceeds {tolerance:.1e}")]
    ResampleInaccurate { estimate: f64, tolerance: f64 },
    #[error("reflection center is not on the half lattice")]
    OffLatticeReflection,
    #[error("symbol cannot be evaluated at the required midpoints")]
    MidpointUnavailable,
    #[error("field is not in the wavepacket range (projector residual {residual:.3e})")]
    NotInRange { residual: f64 },
    #[error("Hermite index {index} exceeds the cap {cap}")]
    IndexCap { index: usize, cap: usize },
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("projection onto the window range vanishes (norm {norm:.3e})")]
    DegenerateProjection { norm: f64 },
    #[error("sub-Gaussian envelope violated at {violations} grid points")]
    BoundNotSatisfied { violations: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
