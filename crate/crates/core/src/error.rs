use thiserror::Error;

/// Errors raised by the manifold-agnostic machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("operands live at different base points")]
    BaseMismatch,
    #[error("point fails the manifold membership test (residual {residual:.3e})")]
    NotOnManifold { residual: f64 },
    #[error("vector fails the tangency test (residual {residual:.3e})")]
    NotTangent { residual: f64 },
    #[error("ambient shapes do not match")]
    ShapeMismatch,
    #[error("invalid problem data: {0}")]
    InvalidProblem(String),
}

/// Failure modes of a retraction evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RetractionError {
    /// The candidate left the open cone of positive definite matrices.
    #[error("retraction left the feasible set")]
    Infeasible,
    /// `qf` of a column-rank-deficient matrix.
    #[error("QR factor is degenerate (triangular diagonal below threshold)")]
    DegenerateFactor,
}
