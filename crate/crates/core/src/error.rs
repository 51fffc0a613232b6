use thiserror::Error;

/// Errors raised by the numerical layers (geometry, smoothness, objectives,
/// optimizers, noise, profiler). Harness-level configuration errors live in
/// [`crate::harness::HarnessError`].
#[derive(Debug, Error)]
pub enum CoreError {
    /// A point or parameter violates a domain precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Floating-point breakdown (underflow of a normalizer, non-finite output).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An iterative procedure failed to settle within its budget.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// An explicit step size exceeds the algorithm's cap.
    #[error("step size error: {0}")]
    StepSize(String),

    /// A stochastic gradient sample broke the almost-sure noise bound.
    #[error("noise error: {0}")]
    Noise(String),

    /// Input data is degenerate for the requested fit or regression.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The requested combination has no implementation (by design).
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
