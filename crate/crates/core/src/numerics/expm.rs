use super::{require_square, solve_matrix, NumericsError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// ‖A‖₁ bound under which the degree-13 approximant is accurate to unit roundoff in f64.
const THETA13: f64 = 5.371920351148152;

/// `e^{A t}` by scaling and squaring around a degree-13 Padé approximant.
pub fn matrix_exp<T: Scalar>(a: &Matrix<T>, t: T) -> Result<Matrix<T>, NumericsError> {
    let n = require_square(a)?;
    let at = a.scale(t);
    if !at.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let id = Matrix::<T>::identity(n);
    let norm = at.norm_one();
    if norm == T::zero() {
        return Ok(id);
    }
    let s = if norm.as_f64() > THETA13 {
        (norm.as_f64() / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let x = at.scale(T::lit(2f64.powi(-s)));
    let b: Vec<T> = PADE13.iter().map(|&c| T::lit(c)).collect();

    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;
    let lin = |c6: T, c4: T, c2: T, c0: T| -> Matrix<T> {
        let mut m = x6.scale(c6);
        m = &m + &x4.scale(c4);
        m = &m + &x2.scale(c2);
        &m + &id.scale(c0)
    };
    let u_inner = &(&x6 * &lin(b[13], b[11], b[9], T::zero())) + &lin(b[7], b[5], b[3], b[1]);
    let u = &x * &u_inner;
    let v = &(&x6 * &lin(b[12], b[10], b[8], T::zero())) + &lin(b[6], b[4], b[2], b[0]);

    let num = &v + &u;
    let den = &v - &u;
    let mut r = solve_matrix(&den, &num, T::epsilon())?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !r.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    Ok(r)
}
