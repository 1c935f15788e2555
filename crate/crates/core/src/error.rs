use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (max |S + S^T| = {residual:e}, tolerance {tolerance:e})")]
    NotSkew { residual: f64, tolerance: f64 },

    #[error("matrix is not orthogonal (max |R^T R - I| = {residual:e})")]
    NotOrthogonal { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value while evaluating {what}")]
    NonFiniteEvaluation { what: String },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("convergence study needs at least 3 step sizes, got {0}")]
    InsufficientSteps(usize),

    #[error("Manakov parameters a_{i} and a_{j} coincide")]
    DegenerateA { i: usize, j: usize },

    #[error("metric is singular or not positive-definite (pivot {pivot:e})")]
    SingularMetric { pivot: f64 },

    #[error("grazing incidence: n^2 - |p|^2 = {margin:e}")]
    GrazingIncidence { margin: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
