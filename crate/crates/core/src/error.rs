use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the physics and fitting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("total decay rate of excited state {state} is zero (infinite lifetime)")]
    InfiniteLifetime { state: usize },

    #[error("excitation expects an empty excited manifold and singlet")]
    NotGroundManifold,

    #[error("populations must sum to 1, got {0}")]
    NotNormalized(f64),

    #[error("pulse map has no unique fixed point (degenerate dynamics)")]
    DegenerateDynamics,

    #[error("design matrix is ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("parameters not identifiable: {0}")]
    NonIdentifiable(String),

    #[error("contrast profile has no sign change")]
    NoReversal,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Input that does not match the expected document or column layout.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("I/O error: {0}")]
    Io(String),
}
