use thiserror::Error;

use crate::expr::ExprError;
use crate::linalg::LinalgError;
use crate::manifold::ManifoldError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("subset enumeration over {0} indices exceeds the limit of 20")]
    EnumerationOverflow(usize),
    #[error("index {index} is not an active inequality at the point")]
    NotActive { index: usize },
    #[error("point is infeasible: max violation {violation:e} exceeds {tol:e}")]
    Infeasible { violation: f64, tol: f64 },
    #[error("empty trace")]
    EmptyTrace,
}
