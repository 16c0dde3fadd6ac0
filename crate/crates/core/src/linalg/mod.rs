//! Dense kernels, the two Krylov solvers used by the step computation, and
//! dense oracles used for fallbacks and verification.
//!
//! Vectors and matrices are `nalgebra` dense types. Everything here is a pure
//! function of its inputs.

mod dense;
mod minres;
mod steihaug;

pub use dense::{
    dense_kkt_solve, jacobi_eigenvalues, least_squares_multiplier, singular_values,
    smallest_singular_value, spectral_norm, KktSolution,
};
pub use minres::{minres_solve, MinresState, MinresStep, SymSolveReport};
pub use steihaug::{cg_steihaug, SteihaugOutcome};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub fn is_finite_vector(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn is_finite_matrix(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// ‖v‖_∞, zero for empty vectors.
pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Induced ∞-norm (max absolute row sum).
pub fn matrix_inf_norm(m: &Matrix) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Quadratic form vᵀ A v.
pub fn quad_form(a: &Matrix, v: &Vector) -> f64 {
    v.dot(&(a * v))
}
