//! Constrained optimization on Riemannian manifolds.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: numerical rank, positive-linear-dependence certificates
//!   (dense two-phase simplex), Carathéodory reduction and basis selection.
//! - [`manifold`]: Euclidean spaces, unit spheres and their products in the
//!   embedded-ambient representation.
//! - [`expr`]: a tiny expression language with forward-mode differentiation,
//!   used to write objectives and constraints.
//! - [`problem`]: the constrained problem, Lagrangian and PHR augmented
//!   Lagrangian machinery.
//! - [`inner_solver`]: Riemannian gradient descent with Armijo backtracking.
//! - [`alm`]: the safeguarded augmented Lagrangian outer loop.
//! - [`cq`]: constraint-qualification certification and sequential
//!   optimality analysis of solver traces.
//! - [`fixtures`]: the built-in problem library.

pub mod alm;
pub mod cq;
mod error;
pub mod expr;
pub mod fixtures;
pub mod inner_solver;
pub mod linalg;
pub mod manifold;
pub mod problem;

pub use error::{Error, Result};
