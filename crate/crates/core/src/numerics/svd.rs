use super::NumericsConfig;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Singular values in descending order, by one-sided Jacobi rotations on
/// the orientation with fewer columns.
pub fn singular_values<T: Scalar>(m: &Matrix<T>, cfg: &NumericsConfig) -> Vec<T> {
    // Work on G with cols = min(rows, cols); its column norms converge to σ.
    let g = if m.cols() <= m.rows() {
        m.clone()
    } else {
        m.transpose()
    };
    let (rows, cols) = g.shape();
    let mut colv: Vec<Vec<T>> = (0..cols).map(|j| g.column(j)).collect();
    let eps = T::epsilon();
    for _ in 0..cfg.jacobi_max_sweeps {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..rows {
                    alpha += colv[p][i] * colv[p][i];
                    beta += colv[q][i] * colv[q][i];
                    gamma += colv[p][i] * colv[q][i];
                }
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let a = colv[p][i];
                    let b = colv[q][i];
                    colv[p][i] = c * a - s * b;
                    colv[q][i] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = colv.iter().map(|c| crate::matrix::norm(c)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    sv
}

/// Numerical rank: singular values above `rank_rel_tol * σ_max`.
pub fn rank<T: Scalar>(m: &Matrix<T>, cfg: &NumericsConfig) -> usize {
    let sv = singular_values(m, cfg);
    let Some(&smax) = sv.first() else { return 0 };
    if smax == T::zero() {
        return 0;
    }
    let thr = T::lit(cfg.rank_rel_tol) * smax;
    sv.iter().filter(|&&s| s > thr).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_diagonal() {
        let m = Matrix::<f64>::diag(&[3.0, -5.0, 1.0]);
        let sv = singular_values(&m, &NumericsConfig::default());
        assert!(
            (sv[0] - 5.0).abs() < 1e-14
                && (sv[1] - 3.0).abs() < 1e-14
                && (sv[2] - 1.0).abs() < 1e-14
        );
    }

    #[test]
    fn wide_matrix_rank() {
        let m = Matrix::<f64>::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]).unwrap();
        assert_eq!(rank(&m, &NumericsConfig::default()), 1);
        let m = Matrix::<f64>::from_rows(&[[1.0, 0.0, 3.0], [2.0, 4.0, 6.0]]).unwrap();
        assert_eq!(rank(&m, &NumericsConfig::default()), 2);
    }

    #[test]
    fn small_singular_value_resolved() {
        // σ = (1, 1e-12): squaring-based methods lose the second value
        let m = Matrix::<f64>::from_rows(&[[1.0, 0.0], [0.0, 1e-12]]).unwrap();
        let sv = singular_values(&m, &NumericsConfig::default());
        assert!((sv[1] - 1e-12).abs() < 1e-24);
        assert_eq!(rank(&m, &NumericsConfig::default()), 1);
    }
}
