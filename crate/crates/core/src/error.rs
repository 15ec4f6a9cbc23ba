use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {z} is not to the right of the support end {beta}")]
    Domain { z: f64, beta: f64 },
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("condenser is degenerate (empty or unbounded on both sides)")]
    DegenerateCondenser,
    #[error("elliptic function iteration did not converge")]
    EllipticConvergence,
    #[error("bound not available: {0}")]
    BoundInvalid(String),
    #[error("Loewner pencil failure: {0}")]
    Pencil(String),
    #[error("pole location error: {0}")]
    PoleLocation(String),
    #[error("interpolation system is rank deficient (non-unique interpolant)")]
    RankDeficiency,
    #[error("continued fraction breakdown at stage {stage}")]
    Breakdown { stage: usize },
    #[error("evaluation point {z} hits a pole")]
    PoleHit { z: f64 },
    #[error("pole {pole} is too close to the spectral interval")]
    PoleCollision { pole: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is numerically singular")]
    SingularMatrix,
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("no degree is accepted by the stopping rule")]
    DegreeUnavailable,
}

pub type Result<T> = std::result::Result<T, Error>;
