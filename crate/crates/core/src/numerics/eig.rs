use num_complex::Complex;

use super::{require_square, NumericsConfig, NumericsError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Eigendecomposition of a symmetric matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct SymEig<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymEig<T> {
    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        self.values[self.values.len() - 1]
    }

    pub fn vector(&self, k: usize) -> Vec<T> {
        self.vectors.column(k)
    }
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
pub fn sym_eig<T: Scalar>(m: &Matrix<T>, cfg: &NumericsConfig) -> Result<SymEig<T>, NumericsError> {
    let n = require_square(m)?;
    if !m.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let asym = m.asymmetry();
    let scale = T::one().max(m.max_abs());
    if asym > T::lit(cfg.symmetry_tol) * scale {
        return Err(NumericsError::NotSymmetric {
            asymmetry: asym.as_f64(),
        });
    }
    let mut a = m.symmetrize();
    let mut v = Matrix::<T>::identity(n);
    let stop = T::lit(cfg.jacobi_tol) * a.frobenius_norm();

    for _ in 0..cfg.jacobi_max_sweeps {
        let off = off_diagonal_norm(&a);
        if off <= stop || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(i, i)]
            .partial_cmp(&a[(j, j)])
            .expect("finite eigenvalues")
    });
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(SymEig { values, vectors })
}

fn off_diagonal_norm<T: Scalar>(a: &Matrix<T>) -> T {
    let n = a.rows();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Eigenvalues of a general real matrix: balancing, reduction to upper
/// Hessenberg form by stabilized elimination, then the shifted double-step
/// QR iteration. Order is unspecified; complex pairs appear as conjugates.
pub fn eigenvalues<T: Scalar>(
    m: &Matrix<T>,
    cfg: &NumericsConfig,
) -> Result<Vec<Complex<T>>, NumericsError> {
    let n = require_square(m)?;
    if !m.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based working copy keeps the classic index arithmetic readable.
    let mut a = vec![vec![T::zero(); n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = m[(i, j)];
        }
    }
    balance(&mut a, n);
    hessenberg(&mut a, n);
    for i in 1..=n {
        for j in 1..i.saturating_sub(1) {
            a[i][j] = T::zero();
        }
    }
    hqr(&mut a, n, cfg.qr_max_iter)
}

fn balance<T: Scalar>(a: &mut [Vec<T>], n: usize) {
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 1..=n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != T::zero() && r != T::zero() {
                let mut g = r / radix;
                let mut f = T::one();
                let s = c + r;
                while c < g {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= sqrdx;
                }
                if (c + r) / f < T::lit(0.95) * s {
                    done = false;
                    let g = T::one() / f;
                    for j in 1..=n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut().take(n + 1).skip(1) {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

fn hessenberg<T: Scalar>(a: &mut [Vec<T>], n: usize) {
    for m in 2..n {
        let mut x = T::zero();
        let mut i = m;
        for j in m..=n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..=n {
                let tmp = a[i][j];
                a[i][j] = a[m][j];
                a[m][j] = tmp;
            }
            for row in a.iter_mut().take(n + 1).skip(1) {
                row.swap(i, m);
            }
        }
        if x != T::zero() {
            for i in (m + 1)..=n {
                let mut y = a[i][m - 1];
                if y != T::zero() {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..=n {
                        let v = a[m][j];
                        a[i][j] -= y * v;
                    }
                    for row in a.iter_mut().take(n + 1).skip(1) {
                        let v = row[i];
                        row[m] += y * v;
                    }
                }
            }
        }
    }
}

#[allow(clippy::many_single_char_names, unused_assignments)]
fn hqr<T: Scalar>(
    a: &mut [Vec<T>],
    n: usize,
    max_iter: usize,
) -> Result<Vec<Complex<T>>, NumericsError> {
    let zero = T::zero();
    let mut wr = vec![zero; n + 1];
    let mut wi = vec![zero; n + 1];
    let mut anorm = zero;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = zero;
    let (mut p, mut q, mut r) = (zero, zero, zero);
    let (mut x, mut y, mut z, mut w) = (zero, zero, zero, zero);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == zero {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = zero;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = zero;
                nn -= 1;
            } else {
                y = a[nn - 1][nn - 1];
                w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    p = T::lit(0.5) * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= zero {
                        z = p + z.abs() * sign_of(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != zero {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = zero;
                        wi[nn] = zero;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                } else {
                    if its == max_iter {
                        return Err(NumericsError::NoConvergence {
                            iterations: its,
                            residual: a[nn][nn - 1].abs().as_f64(),
                        });
                    }
                    if its == 10 || its == 20 {
                        t += x;
                        for i in 1..=nn {
                            a[i][i] -= x;
                        }
                        let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = T::lit(0.75) * s;
                        y = x;
                        w = T::lit(-0.4375) * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        a[i][i - 2] = zero;
                        if i != m + 2 {
                            a[i][i - 3] = zero;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = zero;
                            if k != nn - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != zero {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt() * sign_of(p);
                        if s != zero {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * a[i][k] + y * a[i][k + 1];
                                if k != nn - 1 {
                                    p += z * a[i][k + 2];
                                    a[i][k + 2] -= p * r;
                                }
                                a[i][k + 1] -= p * q;
                                a[i][k] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 2 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex::new(wr[i], wi[i])).collect())
}

#[inline]
fn sign_of<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one()
    } else {
        -T::one()
    }
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa<T: Scalar>(
    m: &Matrix<T>,
    cfg: &NumericsConfig,
) -> Result<T, NumericsError> {
    Ok(eigenvalues(m, cfg)?
        .iter()
        .map(|z| z.re)
        .fold(T::neg_infinity(), T::max))
}

pub fn is_hurwitz<T: Scalar>(m: &Matrix<T>, cfg: &NumericsConfig) -> Result<bool, NumericsError> {
    Ok(spectral_abscissa(m, cfg)? < T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NumericsConfig {
        NumericsConfig::default()
    }

    #[test]
    fn sym_eig_identity() {
        let e = sym_eig(&Matrix::<f64>::identity(3), &cfg()).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn sym_eig_diagonal_sorted() {
        let e = sym_eig(&Matrix::<f64>::diag(&[2.0, -1.0]), &cfg()).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0]);
    }

    #[test]
    fn sym_eig_two_by_two_closed_form() {
        let m = Matrix::<f64>::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = sym_eig(&m, &cfg()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        for k in 0..2 {
            let v = e.vector(k);
            let mv = m.mul_vec(&v);
            for i in 0..2 {
                assert!((mv[i] - e.values[k] * v[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let m = Matrix::<f64>::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            sym_eig(&m, &cfg()),
            Err(NumericsError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn general_eigenvalues_complex_pair() {
        // rotation generator: ±i
        let m = Matrix::<f64>::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let mut ev = eigenvalues(&m, &cfg()).unwrap();
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!(ev[0].re.abs() < 1e-14 && (ev[0].im + 1.0).abs() < 1e-14);
        assert!(ev[1].re.abs() < 1e-14 && (ev[1].im - 1.0).abs() < 1e-14);
    }

    #[test]
    fn general_eigenvalues_companion() {
        // roots 1, 2, 3, 4 of the companion polynomial
        let m = Matrix::<f64>::from_rows(&[
            [10.0, -35.0, 50.0, -24.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let mut re: Vec<f64> = eigenvalues(&m, &cfg())
            .unwrap()
            .iter()
            .map(|z| z.re)
            .collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, v) in re.iter().enumerate() {
            assert!((v - (k as f64 + 1.0)).abs() < 1e-9, "{re:?}");
        }
    }

    #[test]
    fn hurwitz_check() {
        let a = Matrix::<f64>::from_rows(&[[0.0, 1.0], [-1.0, -2.0]]).unwrap();
        assert!(is_hurwitz(&a, &cfg()).unwrap());
        let b = Matrix::<f64>::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(!is_hurwitz(&b, &cfg()).unwrap());
    }
}
