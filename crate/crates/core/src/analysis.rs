//! Diagnostics for recorded runs: consensus and tracking errors, the sum
//! invariant, the Lyapunov functions of both convergence results with their
//! comparison-lemma envelopes, the ultimate-bound radii, and the
//! consensus-manifold oracle.
//!
//! Double sums `Σ_i Σ_{j∈N_i}` run over ordered neighbor pairs, i.e. twice the
//! number of edges; `edge_count_sum` arguments carry that count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{
    boundary_layer, discontinuous_sign, AdaptationRates, Algorithm, NetworkState,
};
use crate::graph::{lambda2, Graph, GraphError};
use crate::matrix::{norm, Matrix};
use crate::numerics::{matrix_exp, sym_eig, NumericsConfig, NumericsError};
use crate::scalar::Scalar;
use crate::signals::{forced_response, ReferenceSet, SignalError};
use crate::sim::{Controller, Problem, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("varrho = {varrho} is not below gamma = {gamma}; the Omega2 bound is vacuous")]
    RhoExceedsGamma { varrho: f64, gamma: f64 },
    #[error("{0} must be positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("{name} = {value} is below its minimal value {min}")]
    ConstantTooSmall {
        name: &'static str,
        value: f64,
        min: f64,
    },
    #[error("adaptive constants are missing")]
    NotAdaptive,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// `ξ_i = x_i - mean_k x_k`.
pub fn consensus_error<T: Scalar>(x: &[Vec<T>]) -> Vec<Vec<T>> {
    center(x, &mean(x))
}

/// `x_i - mean_k r_k`.
pub fn tracking_error<T: Scalar>(x: &[Vec<T>], r: &[Vec<T>]) -> Vec<Vec<T>> {
    center(x, &mean(r))
}

/// `‖Σ x_i - Σ r_i‖`.
pub fn sum_invariant<T: Scalar>(x: &[Vec<T>], r: &[Vec<T>]) -> T {
    let sx = sum(x);
    let sr = sum(r);
    let d: Vec<T> = sx.iter().zip(&sr).map(|(&a, &b)| a - b).collect();
    norm(&d)
}

fn sum<T: Scalar>(v: &[Vec<T>]) -> Vec<T> {
    let n = v.first().map_or(0, Vec::len);
    let mut s = vec![T::zero(); n];
    for vi in v {
        for (a, &b) in s.iter_mut().zip(vi) {
            *a += b;
        }
    }
    s
}

fn mean<T: Scalar>(v: &[Vec<T>]) -> Vec<T> {
    let k = T::from_count(v.len().max(1));
    sum(v).into_iter().map(|s| s / k).collect()
}

fn center<T: Scalar>(x: &[Vec<T>], c: &[T]) -> Vec<Vec<T>> {
    x.iter()
        .map(|xi| xi.iter().zip(c).map(|(&a, &b)| a - b).collect())
        .collect()
}

/// Largest per-agent Euclidean norm.
pub fn max_norm<T: Scalar>(v: &[Vec<T>]) -> T {
    v.iter().map(|vi| norm(vi)).fold(T::zero(), T::max)
}

/// `ξᵀ(M⊗P)ξ` with `M = I - 11ᵀ/N`.
pub fn lyapunov_v1<T: Scalar>(xi: &[Vec<T>], p: &Matrix<T>) -> T {
    let s = sum(xi);
    let own: T = xi.iter().map(|v| p.quadratic_form(v)).sum();
    own - p.quadratic_form(&s) / T::from_count(xi.len().max(1))
}

/// Constants the convergence results are stated in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremConstants<T> {
    /// `λmin(Q)/λmax(P)`.
    pub gamma: T,
    pub lambda2: T,
    pub lambda_min_p: T,
    pub lambda_max_p: T,
    /// `ᾱ`, default `1/(2λ2)`.
    pub alpha_bar: T,
    /// `β̄`, default `f0(N-1)`.
    pub beta_bar: T,
    /// `min{γ, μϑ, νχ}`; adaptive runs only.
    pub delta: Option<T>,
    /// `max{μϑ, νχ}`; adaptive runs only.
    pub varrho: Option<T>,
}

/// Optional replacements for `ᾱ` and `β̄`; each must be at least its minimal value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantOverrides {
    pub alpha_bar: Option<f64>,
    pub beta_bar: Option<f64>,
}

pub fn theorem_constants<T: Scalar>(
    p: &Matrix<T>,
    q: &Matrix<T>,
    g: &Graph,
    f0: T,
    rates: Option<&AdaptationRates<T>>,
    overrides: ConstantOverrides,
    cfg: &NumericsConfig,
) -> Result<TheoremConstants<T>, AnalysisError> {
    let pe = sym_eig(p, cfg)?;
    let qe = sym_eig(q, cfg)?;
    if pe.min() <= T::zero() {
        return Err(AnalysisError::NotPositiveDefinite("P"));
    }
    if qe.min() <= T::zero() {
        return Err(AnalysisError::NotPositiveDefinite("Q"));
    }
    let l2: T = lambda2(g, cfg)?;
    let alpha_min = T::one() / (T::lit(2.0) * l2);
    let beta_min = f0 * T::from_count(g.n_nodes() - 1);
    let pick = |name, over: Option<f64>, min: T| match over {
        None => Ok(min),
        // tolerate round-off when the override restates the minimum
        Some(v) if T::lit(v) >= min * (T::one() - T::lit(1e-12)) => Ok(T::lit(v)),
        Some(v) => Err(AnalysisError::ConstantTooSmall {
            name,
            value: v,
            min: min.as_f64(),
        }),
    };
    let gamma = qe.min() / pe.max();
    let (delta, varrho) = match rates {
        Some(r) => {
            let a = r.mu * r.theta;
            let b = r.nu * r.chi;
            (Some(gamma.min(a).min(b)), Some(a.max(b)))
        }
        None => (None, None),
    };
    Ok(TheoremConstants {
        gamma,
        lambda2: l2,
        lambda_min_p: pe.min(),
        lambda_max_p: pe.max(),
        alpha_bar: pick("alpha_bar", overrides.alpha_bar, alpha_min)?,
        beta_bar: pick("beta_bar", overrides.beta_bar, beta_min)?,
        delta,
        varrho,
    })
}

/// `∫₀ᵗ e^{-a(t-τ) - φτ} dτ`, with the `a = φ` limit `t e^{-at}`.
fn decay_integral<T: Scalar>(t: T, a: T, phi: T) -> T {
    if (a - phi).abs() <= T::lit(1e-12) {
        t * (-a * t).exp()
    } else {
        // e^{-φt}(1 - e^{-(a-φ)t})/(a-φ), without cancellation near a = φ
        let d = a - phi;
        -(-phi * t).exp() * (-d * t).exp_m1() / d
    }
}

/// `e^{-γt}V1(0) + c2 · Σ|N_i| · ε ∫₀ᵗ e^{-γ(t-τ)-φτ} dτ`.
pub fn v1_envelope<T: Scalar>(
    t: T,
    v1_0: T,
    consts: &TheoremConstants<T>,
    c2: T,
    eps: T,
    phi: T,
    edge_count_sum: usize,
) -> T {
    let g = consts.gamma;
    (-g * t).exp() * v1_0 + c2 * T::from_count(edge_count_sum) * eps * decay_integral(t, g, phi)
}

/// `V1 + Σ_i Σ_{j∈N_i} (α̃²/(2μ) + β̃²/(2ν))`, with every edge counted twice.
pub fn lyapunov_v2<T: Scalar>(
    xi: &[Vec<T>],
    p: &Matrix<T>,
    alpha: &[T],
    beta: &[T],
    consts: &TheoremConstants<T>,
    mu: T,
    nu: T,
) -> T {
    let two = T::lit(2.0);
    let gains: T = alpha
        .iter()
        .zip(beta)
        .map(|(&a, &b)| {
            let at = a - consts.alpha_bar;
            let bt = b - consts.beta_bar;
            at * at / (two * mu) + bt * bt / (two * nu)
        })
        .sum();
    lyapunov_v1(xi, p) + two * gains
}

/// `(1/δ) Σ_i Σ_{j∈N_i} (ϑᾱ²/2 + χβ̄²/2)`, the level of the set `V2` is driven
/// into. `None` when `δ` is missing or zero.
pub fn omega1_bound<T: Scalar>(
    consts: &TheoremConstants<T>,
    theta: T,
    chi: T,
    edge_count_sum: usize,
) -> Option<T> {
    let delta = consts.delta.filter(|&d| d > T::zero())?;
    let two = T::lit(2.0);
    let per = theta * consts.alpha_bar * consts.alpha_bar / two
        + chi * consts.beta_bar * consts.beta_bar / two;
    Some(T::from_count(edge_count_sum) * per / delta)
}

/// Bound on `V2(t)` as obtained from the comparison lemma:
/// `e^{-δt}[V2(0) + Ω1] + β̄ Σ|N_i| ε ∫₀ᵗ e^{-δ(t-τ)-φτ} dτ + Ω1`.
#[allow(clippy::too_many_arguments)]
pub fn v2_envelope<T: Scalar>(
    t: T,
    v2_0: T,
    consts: &TheoremConstants<T>,
    theta: T,
    chi: T,
    eps: T,
    phi: T,
    edge_count_sum: usize,
) -> Option<T> {
    let delta = consts.delta?;
    let omega1 = omega1_bound(consts, theta, chi, edge_count_sum)?;
    let pairs = T::from_count(edge_count_sum);
    Some(
        (-delta * t).exp() * (v2_0 + omega1)
            + consts.beta_bar * pairs * eps * decay_integral(t, delta, phi)
            + omega1,
    )
}

/// Radius of the ball `‖ξ‖ ≤ (Σ_i Σ_{j∈N_i} (ϑᾱ² + χβ̄²) / (2λmin(P)(γ - ϱ)))^{1/2}`.
pub fn omega2_radius<T: Scalar>(
    consts: &TheoremConstants<T>,
    theta: T,
    chi: T,
    edge_count_sum: usize,
) -> Result<T, AnalysisError> {
    let varrho = consts.varrho.ok_or(AnalysisError::NotAdaptive)?;
    if varrho >= consts.gamma {
        return Err(AnalysisError::RhoExceedsGamma {
            varrho: varrho.as_f64(),
            gamma: consts.gamma.as_f64(),
        });
    }
    let num = T::from_count(edge_count_sum)
        * (theta * consts.alpha_bar * consts.alpha_bar + chi * consts.beta_bar * consts.beta_bar);
    Ok((num / (T::lit(2.0) * consts.lambda_min_p * (consts.gamma - varrho))).sqrt())
}

/// `(1/N) Σ_k [e^{At} r_k(0) + ∫₀ᵗ e^{A(t-τ)} B f_k(τ) dτ]`, the trajectory all
/// agents converge to.
pub fn consensus_manifold<T: Scalar>(
    rs: &ReferenceSet<T>,
    t: T,
    quad_steps: usize,
) -> Result<Vec<T>, AnalysisError> {
    let plant = rs.plant();
    let mut out = matrix_exp(plant.a(), t)?.mul_vec(&mean(rs.initial_states()));
    let k = T::from_count(rs.n_agents());
    for d in rs.inputs() {
        let f = forced_response(plant, d, t, quad_steps)?;
        for (o, v) in out.iter_mut().zip(f) {
            *o += v / k;
        }
    }
    Ok(out)
}

/// Relative growth of the running maximum of `series` over its final
/// `tail` fraction: `(max_all - max_before) / max(|max_before|, tiny)`.
pub fn running_max_growth<T: Scalar>(series: &[T], tail: f64) -> T {
    if series.len() < 2 {
        return T::zero();
    }
    let start = ((series.len() as f64) * (1.0 - tail)).floor() as usize;
    let start = start.clamp(1, series.len() - 1);
    let before = series[..start]
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let all = series.iter().copied().fold(before, T::max);
    (all - before) / before.abs().max(T::min_positive_value())
}

/// Direction part of every agent's control: `Σ_{j∈N_i} h(K(x_i - x_j))`, or
/// with `h` replaced by `ω/‖ω‖` in discontinuous mode.
pub fn control_direction<T: Scalar>(state: &NetworkState<T>, problem: &Problem<T>) -> Vec<Vec<T>> {
    let k = problem.gain();
    let m = k.rows();
    let mut u = vec![vec![T::zero(); m]; state.x.len()];
    for &(i, j) in problem.graph.edges() {
        let d: Vec<T> = state.x[i]
            .iter()
            .zip(&state.x[j])
            .map(|(&a, &b)| a - b)
            .collect();
        let w = k.mul_vec(&d);
        let h = match &problem.controller {
            Controller::Static(g) => boundary_layer(&w, g.layer.eps, g.layer.phi, state.t),
            Controller::Adaptive(p) => boundary_layer(&w, p.layer.eps, p.layer.phi, state.t),
            Controller::Discontinuous(_) => discontinuous_sign(&w),
        };
        for c in 0..m {
            u[i][c] += h[c];
            u[j][c] -= h[c];
        }
    }
    u
}

/// Number of strict sign changes between consecutive samples, summed over
/// agents and components. `series[k][i][c]` is sample `k`, agent `i`,
/// component `c`; exact zeros neither start nor end a flip.
pub fn sign_flip_count<T: Scalar>(series: &[Vec<Vec<T>>]) -> usize {
    let Some(first) = series.first() else {
        return 0;
    };
    let mut last: Vec<Vec<i8>> = first
        .iter()
        .map(|v| v.iter().map(|&x| sign(x)).collect())
        .collect();
    let mut flips = 0;
    for sample in &series[1..] {
        for (li, vi) in last.iter_mut().zip(sample) {
            for (l, &x) in li.iter_mut().zip(vi) {
                let s = sign(x);
                if s != 0 {
                    if *l != 0 && s != *l {
                        flips += 1;
                    }
                    *l = s;
                }
            }
        }
    }
    flips
}

fn sign<T: Scalar>(x: T) -> i8 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        0
    }
}

/// Settings for [`diagnose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    #[serde(flatten)]
    pub overrides: ConstantOverrides,
    /// Absolute slack when comparing a Lyapunov function to its envelope.
    pub envelope_slack: f64,
    /// Fraction of the horizon over which running maxima must stabilize.
    pub tail_fraction: f64,
    /// Admissible relative growth of the edge gains over that tail.
    pub max_tail_growth: f64,
    /// Fraction of the horizon (from the end) over which sign flips are counted.
    pub flip_window: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            overrides: ConstantOverrides::default(),
            envelope_slack: 1e-6,
            tail_fraction: 0.1,
            max_tail_growth: 0.01,
            flip_window: 0.25,
        }
    }
}

/// One diagnostics row per recorded time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRow<T> {
    pub t: T,
    pub v1: T,
    pub v2: Option<T>,
    /// Envelope of `V1` (static/discontinuous) or `V2` (adaptive).
    pub envelope: Option<T>,
    pub sum_invariant: T,
    pub max_tracking_error: T,
}

/// Run-level results. Metrics undefined for the run's mode are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub lambda2: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub alpha_bar: f64,
    pub beta_bar: f64,
    pub delta: Option<f64>,
    pub varrho: Option<f64>,
    pub omega1_bound: Option<f64>,
    pub omega2_radius: Option<f64>,
    /// Why `omega2_radius` is missing, if it is.
    pub omega2_note: Option<String>,
    /// `‖x_i - mean r‖` per agent at the final time.
    pub final_tracking_error: Vec<f64>,
    pub max_final_tracking_error: f64,
    pub final_consensus_error_norm: f64,
    pub sup_sum_invariant: f64,
    pub envelope_violations: usize,
    pub max_envelope_excess: Option<f64>,
    pub final_v1: f64,
    pub final_v2: Option<f64>,
    pub max_alpha: Option<f64>,
    pub max_beta: Option<f64>,
    pub alpha_tail_growth: Option<f64>,
    pub beta_tail_growth: Option<f64>,
    pub gains_stabilized: Option<bool>,
    pub control_sign_flips: usize,
    pub samples: usize,
    pub substeps: usize,
}

pub struct Diagnostics<T> {
    pub constants: TheoremConstants<T>,
    pub rows: Vec<DiagnosticRow<T>>,
    pub summary: Summary,
}

/// Evaluates every diagnostic over a recorded run. `q` is the weight the ARE
/// was solved with.
pub fn diagnose<T: Scalar>(
    traj: &Trajectory<T>,
    problem: &Problem<T>,
    q: &Matrix<T>,
    cfg: &AnalysisConfig,
    numerics: &NumericsConfig,
) -> Result<Diagnostics<T>, AnalysisError> {
    let g = &problem.graph;
    let pairs = g.ordered_pair_count();
    let f0 = problem.refs.input_bound();
    let (p, rates, layer, static_gains) = match &problem.controller {
        Controller::Static(s) | Controller::Discontinuous(s) => (&s.p, None, s.layer, Some(s)),
        Controller::Adaptive(a) => (&a.p, Some(&a.rates), a.layer, None),
    };
    let consts = theorem_constants(p, q, g, f0, rates, cfg.overrides, numerics)?;
    // the discontinuous law is the ε → 0 limit of the smooth one
    let eps = match problem.controller {
        Controller::Discontinuous(_) => T::zero(),
        _ => layer.eps,
    };

    let mut rows = Vec::with_capacity(traj.len());
    let mut v1_0 = T::zero();
    let mut v2_0 = T::zero();
    let mut violations = 0;
    let mut max_excess: Option<T> = None;
    let slack = T::lit(cfg.envelope_slack);
    for (k, (state, refs)) in traj.states.iter().zip(&traj.references).enumerate() {
        let t = state.t;
        let xi = consensus_error(&state.x);
        let v1 = lyapunov_v1(&xi, p);
        let v2 = match (&state.gains, rates) {
            (Some(eg), Some(r)) => Some(lyapunov_v2(
                &xi, p, &eg.alpha, &eg.beta, &consts, r.mu, r.nu,
            )),
            _ => None,
        };
        if k == 0 {
            v1_0 = v1;
            v2_0 = v2.unwrap_or(T::zero());
        }
        let (value, envelope) = match (static_gains, rates) {
            (Some(s), _) => (
                v1,
                Some(v1_envelope(t, v1_0, &consts, s.c2, eps, layer.phi, pairs)),
            ),
            (None, Some(r)) => (
                v2.unwrap_or(T::zero()),
                v2_envelope(t, v2_0, &consts, r.theta, r.chi, eps, layer.phi, pairs),
            ),
            (None, None) => (v1, None),
        };
        if let Some(env) = envelope {
            let excess = value - env;
            max_excess = Some(max_excess.map_or(excess, |m: T| m.max(excess)));
            if excess > slack {
                violations += 1;
            }
        }
        rows.push(DiagnosticRow {
            t,
            v1,
            v2,
            envelope,
            sum_invariant: sum_invariant(&state.x, refs),
            max_tracking_error: max_norm(&tracking_error(&state.x, refs)),
        });
    }

    let (last, last_refs) = traj
        .last()
        .expect("trajectory has at least the initial sample");
    let final_track: Vec<f64> = tracking_error(&last.x, last_refs)
        .iter()
        .map(|e| norm(e).as_f64())
        .collect();
    let final_xi = consensus_error(&last.x);
    let final_xi_norm = norm(&final_xi.concat());

    let (omega2, omega2_note) = match rates {
        Some(r) => match omega2_radius(&consts, r.theta, r.chi, pairs) {
            Ok(v) => (Some(v.as_f64()), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, None),
    };
    let omega1 = rates.and_then(|r| omega1_bound(&consts, r.theta, r.chi, pairs));

    let gain_stats = matches!(problem.controller, Controller::Adaptive(_)).then(|| {
        let series = |pick: fn(&crate::control::EdgeGains<T>) -> &Vec<T>| -> Vec<T> {
            traj.states
                .iter()
                .map(|s| {
                    s.gains.as_ref().map_or(T::zero(), |g| {
                        pick(g).iter().copied().fold(T::neg_infinity(), T::max)
                    })
                })
                .collect()
        };
        let a = series(|g| &g.alpha);
        let b = series(|g| &g.beta);
        let amax = a.iter().copied().fold(T::neg_infinity(), T::max);
        let bmax = b.iter().copied().fold(T::neg_infinity(), T::max);
        let ag = running_max_growth(&a, cfg.tail_fraction);
        let bg = running_max_growth(&b, cfg.tail_fraction);
        let finite = traj
            .states
            .iter()
            .filter_map(|s| s.gains.as_ref())
            .all(|g| g.alpha.iter().chain(&g.beta).all(|v| v.is_finite()));
        let limit = T::lit(cfg.max_tail_growth);
        (amax, bmax, ag, bg, finite && ag < limit && bg < limit)
    });

    let window_start = ((traj.len() as f64) * (1.0 - cfg.flip_window)).floor() as usize;
    let directions: Vec<Vec<Vec<T>>> = traj.states[window_start.min(traj.len() - 1)..]
        .iter()
        .map(|s| control_direction(s, problem))
        .collect();

    let f = |v: T| v.as_f64();
    let summary = Summary {
        algorithm: problem.controller.algorithm(),
        gamma: f(consts.gamma),
        lambda2: f(consts.lambda2),
        c1: static_gains.map(|s| f(s.c1)),
        c2: static_gains.map(|s| f(s.c2)),
        alpha_bar: f(consts.alpha_bar),
        beta_bar: f(consts.beta_bar),
        delta: consts.delta.map(f),
        varrho: consts.varrho.map(f),
        omega1_bound: omega1.map(f),
        omega2_radius: omega2,
        omega2_note,
        max_final_tracking_error: final_track.iter().copied().fold(0.0, f64::max),
        final_tracking_error: final_track,
        final_consensus_error_norm: f(final_xi_norm),
        sup_sum_invariant: rows.iter().map(|r| f(r.sum_invariant)).fold(0.0, f64::max),
        envelope_violations: violations,
        max_envelope_excess: max_excess.map(f),
        final_v1: f(rows.last().map_or(T::zero(), |r| r.v1)),
        final_v2: rows.last().and_then(|r| r.v2).map(f),
        max_alpha: gain_stats.map(|s| f(s.0)),
        max_beta: gain_stats.map(|s| f(s.1)),
        alpha_tail_growth: gain_stats.map(|s| f(s.2)),
        beta_tail_growth: gain_stats.map(|s| f(s.3)),
        gains_stabilized: gain_stats.map(|s| s.4),
        control_sign_flips: sign_flip_count(&directions),
        samples: traj.len(),
        substeps: traj.substeps,
    };
    Ok(Diagnostics {
        constants: consts,
        rows,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{reference_trajectory, InputDescriptor, LinearPlant};

    fn consts(gamma: f64, phi_like: Option<(f64, f64)>) -> TheoremConstants<f64> {
        TheoremConstants {
            gamma,
            lambda2: 1.0,
            lambda_min_p: 1.0,
            lambda_max_p: 1.0,
            alpha_bar: 0.5,
            beta_bar: 17.5,
            delta: phi_like.map(|p| p.0),
            varrho: phi_like.map(|p| p.1),
        }
    }

    #[test]
    fn consensus_error_examples() {
        let x = vec![vec![1.0, 2.0]; 3];
        assert!(max_norm(&consensus_error(&x)) == 0.0);
        let xi = consensus_error(&[vec![3.0], vec![1.0]]);
        assert_eq!(xi, vec![vec![1.0], vec![-1.0]]);
        let x: Vec<Vec<f64>> = vec![vec![0.3, -1.0], vec![2.0, 5.0], vec![-4.0, 0.25]];
        let once = consensus_error(&x);
        let twice = consensus_error(&once);
        for (a, b) in once.iter().flatten().zip(twice.iter().flatten()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(norm(&sum(&once)) < 1e-12);
    }

    #[test]
    fn tracking_and_invariant() {
        let r = vec![vec![1.0, 0.0], vec![3.0, 2.0]];
        let avg = vec![vec![2.0, 1.0]; 2];
        assert_eq!(max_norm(&tracking_error(&avg, &r)), 0.0);
        assert_eq!(sum_invariant(&r, &r), 0.0);
        let mut x = r.clone();
        x[1][0] += 0.5;
        x[1][1] -= 1.2;
        assert!((sum_invariant(&x, &r) - (0.25f64 + 1.44).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn v1_examples() {
        let p = Matrix::<f64>::identity(2);
        assert_eq!(lyapunov_v1(&[vec![0.0, 0.0], vec![0.0, 0.0]], &p), 0.0);
        let xi = consensus_error(&[vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 4.0]]);
        let n2: f64 = xi.iter().flatten().map(|v| v * v).sum();
        assert!((lyapunov_v1(&xi, &p) - n2).abs() < 1e-12);
    }

    #[test]
    fn envelope_examples() {
        let c = consts(0.5, None);
        assert!((v1_envelope(0.0, 3.0, &c, 17.5, 5.0, 0.5, 12) - 3.0).abs() < 1e-15);
        assert!(v1_envelope(200.0, 3.0, &c, 17.5, 5.0, 0.5, 12) < 1e-30);
        let at = v1_envelope(2.0, 3.0, &c, 17.5, 5.0, 0.5, 12);
        for d in [1e-9, -1e-9] {
            let off = v1_envelope(2.0, 3.0, &c, 17.5, 5.0, 0.5 + d, 12);
            assert!((off - at).abs() < 1e-6);
        }
    }

    #[test]
    fn v2_examples() {
        let c = consts(0.5, Some((0.1, 0.1)));
        let p = Matrix::<f64>::identity(2);
        let xi = vec![vec![0.0, 0.0]; 2];
        assert_eq!(lyapunov_v2(&xi, &p, &[0.5], &[17.5], &c, 10.0, 10.0), 0.0);
        let v = lyapunov_v2(&xi, &p, &[0.0], &[0.0], &c, 1.0, 1.0);
        assert!((v - 2.0 * (0.25 / 2.0 + 17.5 * 17.5 / 2.0)).abs() < 1e-12);
        let v_far = lyapunov_v2(&xi, &p, &[2.0], &[0.0], &c, 1.0, 1.0);
        assert!(v_far > lyapunov_v2(&xi, &p, &[1.0], &[0.0], &c, 1.0, 1.0));
    }

    #[test]
    fn omega2_examples() {
        let c = consts(0.6, Some((0.1, 0.1)));
        assert_eq!(omega2_radius(&c, 0.0, 0.0, 12).unwrap(), 0.0);
        let r1 = omega2_radius(&c, 0.01, 0.0, 12).unwrap();
        let r4 = omega2_radius(&c, 0.04, 0.0, 12).unwrap();
        assert!((r4 / r1 - 2.0).abs() < 1e-12);
        let bad = consts(0.05, Some((0.05, 0.1)));
        assert!(matches!(
            omega2_radius(&bad, 0.01, 0.01, 12),
            Err(AnalysisError::RhoExceedsGamma { .. })
        ));
        assert!(matches!(
            omega2_radius(&consts(0.5, None), 0.01, 0.01, 12),
            Err(AnalysisError::NotAdaptive)
        ));
    }

    #[test]
    fn constants_examples() {
        let cfg = NumericsConfig::default();
        let i2 = Matrix::<f64>::identity(2);
        let g = Graph::ring(6);
        let c =
            theorem_constants(&i2, &i2, &g, 3.5, None, ConstantOverrides::default(), &cfg).unwrap();
        assert!((c.gamma - 1.0).abs() < 1e-15);
        assert!((c.alpha_bar - 0.5).abs() < 1e-12 && (c.beta_bar - 17.5).abs() < 1e-12);
        assert!(c.delta.is_none());
        let rates = AdaptationRates {
            mu: 10.0,
            nu: 10.0,
            theta: 0.01,
            chi: 0.01,
        };
        let c = theorem_constants(
            &i2,
            &i2,
            &g,
            3.5,
            Some(&rates),
            ConstantOverrides::default(),
            &cfg,
        )
        .unwrap();
        assert!((c.delta.unwrap() - 0.1).abs() < 1e-15 && (c.varrho.unwrap() - 0.1).abs() < 1e-15);
        let low = ConstantOverrides {
            alpha_bar: Some(0.1),
            beta_bar: None,
        };
        assert!(theorem_constants(&i2, &i2, &g, 3.5, None, low, &cfg).is_err());
        let high = ConstantOverrides {
            alpha_bar: Some(1.0),
            beta_bar: Some(20.0),
        };
        let c = theorem_constants(&i2, &i2, &g, 3.5, None, high, &cfg).unwrap();
        assert_eq!((c.alpha_bar, c.beta_bar), (1.0, 20.0));
    }

    #[test]
    fn manifold_is_mean_of_references() {
        let plant = LinearPlant::new(
            Matrix::from_rows(&[[0.0, 1.0], [-1.0, -2.0]]).unwrap(),
            Matrix::from_rows(&[[0.0], [1.0]]).unwrap(),
        )
        .unwrap();
        let rs = ReferenceSet::new(
            plant,
            vec![vec![1.0, -1.0], vec![2.0, 0.5], vec![-3.0, 0.0]],
            vec![
                InputDescriptor::sinusoid(vec![1.0], 1.0, 0.0),
                InputDescriptor::Constant { value: vec![0.5] },
                InputDescriptor::sinusoid(vec![2.0], 0.5, 1.0),
            ],
        )
        .unwrap();
        let m = consensus_manifold(&rs, 3.0, 600).unwrap();
        let refs: Vec<Vec<f64>> = (0..3)
            .map(|i| reference_trajectory(&rs, i, 3.0, 600).unwrap())
            .collect();
        let avg = mean(&refs);
        assert!((m[0] - avg[0]).abs() < 1e-9 && (m[1] - avg[1]).abs() < 1e-9);
    }

    #[test]
    fn sign_flips_and_growth() {
        let s = |v: &[f64]| v.iter().map(|&x| vec![vec![x]]).collect::<Vec<_>>();
        assert_eq!(sign_flip_count(&s(&[1.0, -1.0, 1.0, -1.0])), 3);
        assert_eq!(sign_flip_count(&s(&[1.0, 0.0, 1.0, 0.0, -1.0])), 1);
        assert_eq!(sign_flip_count::<f64>(&[]), 0);
        assert_eq!(
            running_max_growth(&[1.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0], 0.1),
            0.0
        );
        let g = running_max_growth::<f64>(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.5], 0.1);
        assert!((g - 0.5).abs() < 1e-15);
    }
}
