use super::{require_square, Lu, NumericsConfig, NumericsError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Solves `Fᵀ X + X F + Q = 0` for symmetric `X`.
///
/// The equation is vectorized (row-major `vec`) into the `n² x n²` system
/// `(Fᵀ ⊕ Fᵀ) vec(X) = -vec(Q)` and solved by pivoted LU. Solvable whenever
/// no two eigenvalues of `F` sum to zero, in particular for Hurwitz `F`.
pub fn solve_lyapunov<T: Scalar>(
    f: &Matrix<T>,
    q: &Matrix<T>,
    cfg: &NumericsConfig,
) -> Result<Matrix<T>, NumericsError> {
    let n = require_square(f)?;
    if q.shape() != (n, n) {
        return Err(NumericsError::DimensionMismatch(format!(
            "lyapunov: F is {n}x{n} but Q is {}x{}",
            q.rows(),
            q.cols()
        )));
    }
    let asym = q.asymmetry();
    if asym > T::lit(cfg.symmetry_tol) * T::one().max(q.max_abs()) {
        return Err(NumericsError::NotSymmetric {
            asymmetry: asym.as_f64(),
        });
    }
    let nn = n * n;
    let mut sys = Matrix::<T>::zeros(nn, nn);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                // (Fᵀ X)_ij = Σ_k F_ki X_kj
                sys[(row, k * n + j)] += f[(k, i)];
                // (X F)_ij = Σ_k X_ik F_kj
                sys[(row, i * n + k)] += f[(k, j)];
            }
        }
    }
    let rhs: Vec<T> = q.as_slice().iter().map(|&v| -v).collect();
    let lu = Lu::new(&sys, T::lit(cfg.singular_tol))?;
    let x = lu.solve_vec(&rhs);
    let x = Matrix::from_vec(n, n, x).expect("n*n buffer").symmetrize();
    if !x.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let residual = lyapunov_residual(f, &x, q);
    let scale = T::one()
        .max(q.frobenius_norm())
        .max(T::lit(2.0) * f.frobenius_norm() * x.frobenius_norm());
    if residual > T::lit(cfg.lyapunov_residual_tol) * scale {
        return Err(NumericsError::SingularSystem);
    }
    Ok(x)
}

/// Frobenius norm of `Fᵀ X + X F + Q`.
pub fn lyapunov_residual<T: Scalar>(f: &Matrix<T>, x: &Matrix<T>, q: &Matrix<T>) -> T {
    let ftx = &f.transpose() * x;
    let xf = x * f;
    (&(&ftx + &xf) + q).frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NumericsConfig {
        NumericsConfig::default()
    }

    #[test]
    fn negative_identity() {
        let f = Matrix::<f64>::identity(2).scale(-1.0);
        let x = solve_lyapunov(&f, &Matrix::identity(2), &cfg()).unwrap();
        assert!((&x - &Matrix::identity(2).scale(0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn decoupled_diagonal() {
        let f = Matrix::<f64>::diag(&[-1.0, -2.0]);
        let q = Matrix::<f64>::diag(&[2.0, 4.0]);
        let x = solve_lyapunov(&f, &q, &cfg()).unwrap();
        assert!((&x - &Matrix::identity(2)).max_abs() < 1e-15);
    }

    #[test]
    fn coupled_residual_oracle() {
        let f = Matrix::<f64>::from_rows(&[[0.0, 1.0], [-1.0, -2.0]]).unwrap();
        let q = Matrix::<f64>::identity(2);
        let x = solve_lyapunov(&f, &q, &cfg()).unwrap();
        assert!(lyapunov_residual(&f, &x, &q) <= 1e-10);
        assert!(x.is_symmetric(1e-15));
    }

    #[test]
    fn singular_when_eigenvalues_cancel() {
        // eigenvalues ±1 sum to zero
        let f = Matrix::<f64>::diag(&[1.0, -1.0]);
        let r = solve_lyapunov(&f, &Matrix::identity(2), &cfg());
        assert_eq!(r, Err(NumericsError::SingularSystem));
    }
}
