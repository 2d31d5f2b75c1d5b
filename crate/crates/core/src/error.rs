use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not self-adjoint with respect to the metric (defect {defect:.3e})")]
    NotSelfAdjoint { defect: f64 },

    #[error("positivity lost: minimum eigenvalue {min_eigenvalue:.3e} below threshold {threshold:.3e}{}", location.as_ref().map(|l| format!(" at {l}")).unwrap_or_default())]
    PositivityLost {
        min_eigenvalue: f64,
        threshold: f64,
        location: Option<String>,
    },

    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("CFL violation: step {step:.3e} exceeds limit {limit:.3e}")]
    Cfl { step: f64, limit: f64 },

    #[error("determinant renormalisation of {correction:.3e} in one step exceeds 1e-6 at s = {s}")]
    DeterminantDrift { correction: f64, s: f64 },

    #[error("constraint drift {drift:.3e} exceeds limit at t = {t}")]
    ConstraintDrift { drift: f64, t: f64 },

    #[error("block {block} scale reached zero near t = {t}")]
    ScaleCollapse { block: usize, t: f64 },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("missing field: {0}")]
    MissingField(&'static str),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
