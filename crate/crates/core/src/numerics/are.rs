use super::{
    eigenvalues, is_hurwitz, is_stabilizable, require_square, solve_lyapunov, sym_eig,
    NumericsConfig, NumericsError, SymEig,
};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Stabilizing solution of `P A + Aᵀ P - P B Bᵀ P + Q = 0`.
#[derive(Debug, Clone)]
pub struct AreSolution<T> {
    pub p: Matrix<T>,
    /// `‖P A + Aᵀ P - P B Bᵀ P + Q‖_F`.
    pub residual_norm: T,
    pub iterations: usize,
}

impl<T: Scalar> AreSolution<T> {
    /// State-feedback gain `K = -Bᵀ P`.
    pub fn gain(&self, b: &Matrix<T>) -> Matrix<T> {
        (&b.transpose() * &self.p).scale(-T::one())
    }
}

pub(crate) fn are_residual<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    q: &Matrix<T>,
    p: &Matrix<T>,
) -> T {
    let pa = p * a;
    let bbt = b * &b.transpose();
    let pbbtp = &(p * &bbt) * p;
    let r = &(&(&pa + &pa.transpose()) - &pbbtp) + q;
    r.frobenius_norm()
}

/// Newton–Kleinman iteration for the continuous-time ARE.
///
/// The starting gain comes from the Bass shift: with `β = ‖A‖_F + 1`, the
/// Gramian-like `Z` solving `(A + βI) Z + Z (A + βI)ᵀ = 2 B Bᵀ` yields the
/// stabilizing gain `K₀ = Bᵀ Z⁺`. The pseudo-inverse restricts the gain to
/// the reachable subspace, so merely stabilizable pairs work too. Each step
/// then solves `A_kᵀ P + P A_k + Q + K_kᵀ K_k = 0` with `A_k = A - B K_k` and
/// updates `K_{k+1} = Bᵀ P`.
pub fn solve_are<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    q: &Matrix<T>,
    cfg: &NumericsConfig,
) -> Result<AreSolution<T>, NumericsError> {
    let n = require_square(a)?;
    if b.rows() != n || q.shape() != (n, n) {
        return Err(NumericsError::DimensionMismatch(format!(
            "ARE: A {n}x{n}, B {}x{}, Q {}x{}",
            b.rows(),
            b.cols(),
            q.rows(),
            q.cols()
        )));
    }
    let qe = sym_eig(q, cfg)?;
    if qe.min() <= T::zero() {
        return Err(NumericsError::NotPositiveDefinite {
            min_eigenvalue: qe.min().as_f64(),
        });
    }
    if !is_stabilizable(a, b, cfg)? {
        return Err(NumericsError::NotStabilizable);
    }
    let bt = b.transpose();
    let mut k = bass_gain(a, b, cfg)?;
    let step_tol = T::lit(cfg.are_step_tol);
    let mut prev: Option<Matrix<T>> = None;
    let mut iterations = 0;
    while iterations < cfg.are_max_iter {
        iterations += 1;
        let ak = a - &(b * &k);
        let rhs = q + &(&k.transpose() * &k);
        let p = solve_lyapunov(&ak, &rhs, cfg)?;
        k = &bt * &p;
        if let Some(prev_p) = prev.as_ref() {
            let diff = (&p - prev_p).frobenius_norm();
            if diff <= step_tol * T::one().max(p.frobenius_norm()) {
                prev = Some(p);
                break;
            }
        }
        prev = Some(p);
    }
    let mut p = prev.expect("at least one iteration");
    let mut residual_norm = are_residual(a, b, q, &p);
    // Newton steps in correction form solve for the small update only, which
    // recovers the digits the Kleinman form loses to cancellation
    let bbt = b * &bt;
    for _ in 0..cfg.are_refine_steps {
        let pa = &p * a;
        let r = &(&(&pa + &pa.transpose()) - &(&(&p * &bbt) * &p)) + q;
        let closed = a - &(&bbt * &p);
        let Ok(delta) = solve_lyapunov(&closed, &r.symmetrize(), cfg) else {
            break;
        };
        let candidate = &p + &delta;
        let candidate_residual = are_residual(a, b, q, &candidate);
        if candidate_residual.is_nan() || candidate_residual >= residual_norm {
            break;
        }
        p = candidate;
        residual_norm = candidate_residual;
    }
    // a stalled iterate is still accepted when it solves the equation
    if residual_norm > T::lit(cfg.are_residual_tol) {
        return Err(NumericsError::NoConvergence {
            iterations,
            residual: residual_norm.as_f64(),
        });
    }
    let pe = sym_eig(&p, cfg)?;
    if pe.min() <= T::zero() {
        return Err(NumericsError::NotPositiveDefinite {
            min_eigenvalue: pe.min().as_f64(),
        });
    }
    Ok(AreSolution {
        p,
        residual_norm,
        iterations,
    })
}

/// Stabilizing starting gain from the Bass shift (see [`solve_are`]).
///
/// Large shifts push every closed-loop pole far left, which for single-input
/// plants needs gains growing like `β^n`; the smallest shift that makes
/// `A + βI` anti-stable is tried first, then `‖A‖_F + 1`. The shifted Gramian
/// can be badly conditioned, so for each shift the pseudo-inverse cutoff is
/// relaxed step by step down to machine precision until the gain stabilizes
/// `A - B K`.
pub fn bass_gain<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    cfg: &NumericsConfig,
) -> Result<Matrix<T>, NumericsError> {
    let n = a.rows();
    let min_re = eigenvalues(a, cfg)?
        .iter()
        .map(|l| l.re)
        .fold(T::infinity(), T::min);
    let tight = T::one() + (-min_re).max(T::zero());
    let wide = (a.frobenius_norm() + T::one()).max(tight);
    let floor = T::epsilon() * T::from_count(10 * n);
    let mut last = None;
    for beta in [tight, wide] {
        let shifted = a + &Matrix::identity(n).scale(beta);
        // F = -(A + βI)ᵀ is Hurwitz; Fᵀ Z + Z F + 2BBᵀ = 0 is the Bass equation.
        let f = shifted.transpose().scale(-T::one());
        let bbt2 = (b * &b.transpose()).scale(T::lit(2.0));
        let z = solve_lyapunov(&f, &bbt2, cfg)?;
        let ze = sym_eig(&z, cfg)?;
        let top = ze.max().abs().max(T::min_positive_value());
        let mut rel = T::lit(cfg.rank_rel_tol);
        loop {
            let rel_now = rel.max(floor);
            let k = &b.transpose() * &pseudo_inverse(&ze, rel_now * top);
            if is_hurwitz(&(a - &(b * &k)), cfg)? {
                return Ok(k);
            }
            last = Some(k);
            if rel_now <= floor {
                break;
            }
            rel *= T::lit(1e-2);
        }
    }
    Ok(last.expect("at least one candidate"))
}

fn pseudo_inverse<T: Scalar>(e: &SymEig<T>, cutoff: T) -> Matrix<T> {
    let n = e.values.len();
    let mut inv = Matrix::<T>::zeros(n, n);
    for (k, &lam) in e.values.iter().enumerate() {
        if lam > cutoff {
            let v = e.vector(k);
            for i in 0..n {
                for j in 0..n {
                    inv[(i, j)] += v[i] * v[j] / lam;
                }
            }
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NumericsConfig {
        NumericsConfig::default()
    }

    #[test]
    fn scalar_integrator() {
        let a = Matrix::<f64>::from_rows(&[[0.0]]).unwrap();
        let b = Matrix::<f64>::from_rows(&[[1.0]]).unwrap();
        let q = Matrix::<f64>::from_rows(&[[1.0]]).unwrap();
        let sol = solve_are(&a, &b, &q, &cfg()).unwrap();
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((sol.gain(&b)[(0, 0)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn stable_diagonal_plant() {
        // p² + 2p - 1 = 0 per axis
        let a = Matrix::<f64>::identity(2).scale(-1.0);
        let b = Matrix::identity(2);
        let sol = solve_are(&a, &b, &Matrix::identity(2), &cfg()).unwrap();
        let want = 2f64.sqrt() - 1.0;
        assert!((&sol.p - &Matrix::identity(2).scale(want)).max_abs() < 1e-12);
        assert!(sol.residual_norm <= 1e-9);
    }

    #[test]
    fn closed_loop_is_hurwitz() {
        let a = Matrix::<f64>::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let b = Matrix::<f64>::from_rows(&[[0.0], [1.0]]).unwrap();
        let sol = solve_are(&a, &b, &Matrix::identity(2), &cfg()).unwrap();
        let acl = &a + &(&b * &sol.gain(&b));
        assert!(is_hurwitz(&acl, &cfg()).unwrap());
    }

    #[test]
    fn stabilizable_but_not_controllable() {
        // second mode is stable and unreachable
        let a = Matrix::<f64>::diag(&[1.0, -2.0]);
        let b = Matrix::<f64>::from_rows(&[[1.0], [0.0]]).unwrap();
        let sol = solve_are(&a, &b, &Matrix::identity(2), &cfg()).unwrap();
        assert!(sol.residual_norm <= 1e-9);
        // scalar ARE per mode: 2p - p² + 1 = 0 and -4p + 1 = 0
        assert!((sol.p[(0, 0)] - (1.0 + 2f64.sqrt())).abs() < 1e-10);
        assert!((sol.p[(1, 1)] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_input_with_four_unstable_modes() {
        // the wide Bass shift needs a gain near 1e6 here; the tight one does not
        let a = Matrix::<f64>::from_rows(&[
            [
                -1.0248529091326883,
                -0.2722526582546587,
                -0.4670866107252536,
                0.49368309779393993,
                -1.3773662462779974,
                0.7827688118973759,
            ],
            [
                1.0385037357085087,
                1.9340604047000403,
                1.4859098098271062,
                -0.6436104057037237,
                -0.8443375180582784,
                1.5502327190653054,
            ],
            [
                -0.3847839865389382,
                -1.722139756400212,
                -1.721322766368596,
                1.2713210250851992,
                -1.679789979551514,
                -1.302223287601345,
            ],
            [
                -1.4500503144684256,
                -0.7515259505872276,
                -1.611573730358825,
                1.9191870174866068,
                -0.5716471632737212,
                0.6751205568230549,
            ],
            [
                1.3083608075083344,
                -0.9800636014482054,
                0.13982532936739567,
                -1.0061390803797172,
                -1.4304524050764256,
                0.6556929945719983,
            ],
            [
                -1.8233025716057663,
                -0.832990556230305,
                0.8882312972621369,
                -1.8801656079219766,
                1.9655910301222557,
                -0.16579276936089915,
            ],
        ])
        .unwrap();
        let b = Matrix::<f64>::from_rows(&[
            [-1.194805228771969],
            [1.0729908209485233],
            [-0.6026038335180779],
            [-0.1485257013148349],
            [1.4705841213492379],
            [0.21588813292254194],
        ])
        .unwrap();
        let k0 = bass_gain(&a, &b, &cfg()).unwrap();
        assert!(is_hurwitz(&(&a - &(&b * &k0)), &cfg()).unwrap());
        let relaxed = NumericsConfig {
            are_residual_tol: f64::INFINITY,
            ..cfg()
        };
        let sol = solve_are(&a, &b, &Matrix::identity(6), &relaxed).unwrap();
        let p_norm = sol.p.frobenius_norm();
        assert!(sol.residual_norm <= 1e-14 * p_norm * p_norm * b.frobenius_norm().powi(2));
        assert!(is_hurwitz(&(&a + &(&b * &sol.gain(&b))), &cfg()).unwrap());
    }

    #[test]
    fn not_stabilizable_rejected() {
        let a = Matrix::<f64>::identity(2);
        let b = Matrix::zeros(2, 1);
        let r = solve_are(&a, &b, &Matrix::identity(2), &cfg());
        assert!(matches!(r, Err(NumericsError::NotStabilizable)));
    }

    #[test]
    fn indefinite_q_rejected() {
        let a = Matrix::<f64>::identity(1).scale(-1.0);
        let b = Matrix::identity(1);
        let q = Matrix::<f64>::from_rows(&[[-1.0]]).unwrap();
        assert!(matches!(
            solve_are(&a, &b, &q, &cfg()),
            Err(NumericsError::NotPositiveDefinite { .. })
        ));
    }
}
