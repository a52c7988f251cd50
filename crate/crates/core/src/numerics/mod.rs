//! Dense linear-algebra kernel: symmetric and general eigenvalues, singular
//! values, linear solves, Lyapunov and Riccati solvers, matrix exponential,
//! and the PBH stabilizability test.

mod are;
mod eig;
mod expm;
mod linsolve;
mod lyapunov;
mod stabilizable;
mod svd;

pub use are::{bass_gain, solve_are, AreSolution};
pub use eig::{eigenvalues, is_hurwitz, spectral_abscissa, sym_eig, SymEig};
pub use expm::matrix_exp;
pub use linsolve::{invert, solve, solve_matrix, Lu};
pub use lyapunov::{lyapunov_residual, solve_lyapunov};
pub use stabilizable::is_stabilizable;
pub use svd::{rank, singular_values};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("linear system is singular to working precision")]
    SingularSystem,
    #[error("(A, B) is not stabilizable")]
    NotStabilizable,
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("non-finite entries produced")]
    NonFinite,
}

/// Tolerances for the numerical kernel. Values are stored as `f64` and
/// converted to the working scalar on use; the defaults target `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Admissible asymmetry for inputs declared symmetric.
    pub symmetry_tol: f64,
    /// Off-diagonal threshold (relative to the Frobenius norm) ending Jacobi sweeps.
    pub jacobi_tol: f64,
    pub jacobi_max_sweeps: usize,
    /// Relative pivot threshold below which a linear system is declared singular.
    pub singular_tol: f64,
    /// Lyapunov solves whose residual exceeds this (relative to
    /// `max(1, ‖Q‖_F, 2‖F‖_F‖X‖_F)`) are reported as ill-conditioned.
    pub lyapunov_residual_tol: f64,
    pub are_residual_tol: f64,
    /// Newton–Kleinman stops when successive iterates differ by less than this
    /// (relative to `max(1, ‖P‖_F)`).
    pub are_step_tol: f64,
    pub are_max_iter: usize,
    /// Residual-correction Newton steps applied after the iteration stops.
    pub are_refine_steps: usize,
    /// Relative singular-value threshold used for rank decisions.
    pub rank_rel_tol: f64,
    /// Eigenvalues with real part above `-marginal_tol * max(1, ‖A‖_F)` count as
    /// unstable in the PBH test.
    pub marginal_tol: f64,
    pub qr_max_iter: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            symmetry_tol: 1e-10,
            jacobi_tol: 1e-15,
            jacobi_max_sweeps: 100,
            singular_tol: 1e-14,
            lyapunov_residual_tol: 1e-10,
            are_residual_tol: 1e-9,
            are_step_tol: 1e-12,
            are_max_iter: 100,
            are_refine_steps: 3,
            rank_rel_tol: 1e-10,
            marginal_tol: 1e-10,
            qr_max_iter: 60,
        }
    }
}

impl NumericsConfig {
    /// Tolerances scaled for single precision.
    pub fn single_precision() -> Self {
        Self {
            symmetry_tol: 1e-4,
            jacobi_tol: 1e-7,
            singular_tol: 1e-6,
            lyapunov_residual_tol: 1e-3,
            are_residual_tol: 1e-3,
            are_step_tol: 1e-5,
            rank_rel_tol: 1e-5,
            marginal_tol: 1e-5,
            ..Self::default()
        }
    }
}

pub(crate) fn require_square<T>(m: &crate::matrix::Matrix<T>) -> Result<usize, NumericsError> {
    if m.rows() != m.cols() {
        return Err(NumericsError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    Ok(m.rows())
}
