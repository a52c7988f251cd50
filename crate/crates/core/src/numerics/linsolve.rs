use super::{require_square, NumericsError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    /// Factorizes `a`; a pivot below `rel_tol * max|a|` reports `SingularSystem`.
    pub fn new(a: &Matrix<T>, rel_tol: T) -> Result<Self, NumericsError> {
        let n = require_square(a)?;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        if !scale.is_finite() {
            return Err(NumericsError::NonFinite);
        }
        let threshold = rel_tol * scale.max(T::min_positive_value());
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold(
                        (k, -T::one()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot <= threshold || pivot == T::zero() {
                return Err(NumericsError::SingularSystem);
            }
            lu.swap_rows(k, p);
            perm.swap(k, p);
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in (k + 1)..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= f * v;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "solve: rhs length mismatch");
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                y[i] = y[i] - l * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = self.lu[(i, j)];
                y[i] = y[i] - u * y[j];
            }
            y[i] /= self.lu[(i, i)];
        }
        y
    }

    pub fn solve_mat(&self, b: &Matrix<T>) -> Matrix<T> {
        let cols: Vec<Vec<T>> = (0..b.cols())
            .map(|j| self.solve_vec(&b.column(j)))
            .collect();
        Matrix::from_fn(b.rows(), b.cols(), |i, j| cols[j][i])
    }
}

pub fn solve<T: Scalar>(a: &Matrix<T>, b: &[T], rel_tol: T) -> Result<Vec<T>, NumericsError> {
    Ok(Lu::new(a, rel_tol)?.solve_vec(b))
}

pub fn solve_matrix<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    rel_tol: T,
) -> Result<Matrix<T>, NumericsError> {
    if a.rows() != b.rows() {
        return Err(NumericsError::DimensionMismatch(format!(
            "solve: {}x{} system with {} rhs rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    Ok(Lu::new(a, rel_tol)?.solve_mat(b))
}

pub fn invert<T: Scalar>(a: &Matrix<T>, rel_tol: T) -> Result<Matrix<T>, NumericsError> {
    let n = require_square(a)?;
    solve_matrix(a, &Matrix::identity(n), rel_tol)
}
