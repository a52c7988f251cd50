use super::{eigenvalues, rank, NumericsConfig, NumericsError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// PBH stabilizability test: for every eigenvalue `λ` of `A` with
/// `Re λ ≥ 0`, `[A - λI, B]` must have full row rank.
///
/// Complex `λ = a + ib` is handled through the real embedding
/// `[[A - aI, bI, B, 0], [-bI, A - aI, 0, B]]`, whose rank is twice the
/// complex rank.
pub fn is_stabilizable<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    cfg: &NumericsConfig,
) -> Result<bool, NumericsError> {
    let n = super::require_square(a)?;
    if b.rows() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "A is {n}x{n} but B has {} rows",
            b.rows()
        )));
    }
    let m = b.cols();
    let marginal = T::lit(cfg.marginal_tol) * T::one().max(a.frobenius_norm());
    for lambda in eigenvalues(a, cfg)? {
        if lambda.re < -marginal {
            continue;
        }
        // conjugate partners give the same verdict
        if lambda.im < T::zero() {
            continue;
        }
        let full = if lambda.im == T::zero() {
            let shifted = Matrix::from_fn(n, n + m, |i, j| {
                if j < n {
                    a[(i, j)] - if i == j { lambda.re } else { T::zero() }
                } else {
                    b[(i, j - n)]
                }
            });
            rank(&shifted, cfg) == n
        } else {
            let (re, im) = (lambda.re, lambda.im);
            let emb = Matrix::from_fn(2 * n, 2 * n + 2 * m, |i, j| {
                let (bi, ii) = (i / n, i % n);
                if j < 2 * n {
                    let (bj, jj) = (j / n, j % n);
                    let diag = if ii == jj { T::one() } else { T::zero() };
                    match (bi, bj) {
                        (0, 0) | (1, 1) => a[(ii, jj)] - re * diag,
                        (0, 1) => im * diag,
                        _ => -im * diag,
                    }
                } else {
                    let jb = j - 2 * n;
                    let (bj, jj) = (jb / m, jb % m);
                    if bi == bj {
                        b[(ii, jj)]
                    } else {
                        T::zero()
                    }
                }
            });
            rank(&emb, cfg) == 2 * n
        };
        if !full {
            return Ok(false);
        }
    }
    Ok(true)
}
