//! Distributed average-tracking laws.
//!
//! Both laws are edge-based: every undirected edge `(i, j)` contributes a term
//! built from `w = K(x_i - x_j)` to agent `i` and its exact negation to agent
//! `j`. Adaptive gains are stored once per edge, so `α_ij ≡ α_ji` holds by
//! construction.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{lambda2, Graph, GraphError};
use crate::matrix::{norm, Matrix};
use crate::numerics::{is_stabilizable, solve_are, NumericsConfig, NumericsError};
use crate::scalar::Scalar;
use crate::signals::{LinearPlant, ReferenceSet};

/// The three steps of the gain-design procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignStep {
    Riccati,
    FirstCoupling,
    SecondCoupling,
}

impl fmt::Display for DesignStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Riccati => "step 1 (solve the ARE for P > 0, K = -B^T P)",
            Self::FirstCoupling => "step 2 (c1 >= 1/(2 lambda2) needs a connected graph)",
            Self::SecondCoupling => "step 3 (c2 >= f0 (N - 1))",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("gain design failed at {step}: {source}")]
    Numerics {
        step: DesignStep,
        #[source]
        source: NumericsError,
    },
    #[error("gain design failed at {step}: {source}")]
    Graph {
        step: DesignStep,
        #[source]
        source: GraphError,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph has {graph} nodes but the reference set has {agents} agents")]
    AgentCount { graph: usize, agents: usize },
}

impl ControlError {
    /// The design step that failed, if the error came from gain design.
    pub fn step(&self) -> Option<DesignStep> {
        match self {
            Self::Numerics { step, .. } | Self::Graph { step, .. } => Some(*step),
            _ => None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> ControlError {
    ControlError::InvalidParameter(msg.into())
}

/// Smoothing `εe^{-φt}` of the boundary-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryLayer<T> {
    pub eps: T,
    pub phi: T,
}

impl<T: Scalar> BoundaryLayer<T> {
    pub fn new(eps: T, phi: T) -> Result<Self, ControlError> {
        if !(eps > T::zero() && eps.is_finite()) {
            return Err(invalid(format!("eps must be positive, got {eps}")));
        }
        if !(phi >= T::zero() && phi.is_finite()) {
            return Err(invalid(format!("phi must be nonnegative, got {phi}")));
        }
        Ok(Self { eps, phi })
    }

    /// Layer width `εe^{-φt}`.
    pub fn width(&self, t: T) -> T {
        self.eps * (-self.phi * t).exp()
    }
}

/// `h(ω) = ω / (‖ω‖ + εe^{-φt})`.
pub fn boundary_layer<T: Scalar>(w: &[T], eps: T, phi: T, t: T) -> Vec<T> {
    let s = T::one() / (norm(w) + eps * (-phi * t).exp());
    w.iter().map(|&v| v * s).collect()
}

/// `ω/‖ω‖`, or zero when `‖ω‖ ≤ 1e-15`.
pub fn discontinuous_sign<T: Scalar>(w: &[T]) -> Vec<T> {
    let n = norm(w);
    if n <= T::lit(1e-15) {
        return vec![T::zero(); w.len()];
    }
    w.iter().map(|&v| v / n).collect()
}

/// Which closed loop to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Static,
    Adaptive,
    /// The static law with `h` replaced by `ω/‖ω‖`; for chattering comparison only.
    Discontinuous,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Static => "static",
            Self::Adaptive => "adaptive",
            Self::Discontinuous => "discontinuous",
        })
    }
}

/// Designed constants of the static law.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticGains<T> {
    pub k: Matrix<T>,
    pub c1: T,
    pub c2: T,
    pub layer: BoundaryLayer<T>,
    /// ARE solution `K` was built from.
    pub p: Matrix<T>,
}

/// Multipliers applied to the minimal coupling strengths; both must be ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Margins {
    pub c1: f64,
    pub c2: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Self { c1: 1.0, c2: 1.0 }
    }
}

/// Solves the ARE, returning `P` with `K = -BᵀP`.
pub fn design_feedback<T: Scalar>(
    plant: &LinearPlant<T>,
    q: &Matrix<T>,
    cfg: &NumericsConfig,
) -> Result<(Matrix<T>, Matrix<T>), ControlError> {
    let wrap = |source| ControlError::Numerics {
        step: DesignStep::Riccati,
        source,
    };
    if !is_stabilizable(plant.a(), plant.b(), cfg).map_err(wrap)? {
        return Err(wrap(NumericsError::NotStabilizable));
    }
    let sol = solve_are(plant.a(), plant.b(), q, cfg).map_err(wrap)?;
    let k = sol.gain(plant.b());
    Ok((sol.p, k))
}

/// Three-step gain design: `P` from the ARE, `c1 = m1/(2λ2)`, `c2 = m2·f0·(N-1)`.
pub fn design_gains<T: Scalar>(
    plant: &LinearPlant<T>,
    g: &Graph,
    q: &Matrix<T>,
    f0: T,
    margins: Margins,
    layer: BoundaryLayer<T>,
    cfg: &NumericsConfig,
) -> Result<StaticGains<T>, ControlError> {
    if !(margins.c1 >= 1.0 && margins.c2 >= 1.0) {
        return Err(invalid(format!(
            "margins must be >= 1, got ({}, {})",
            margins.c1, margins.c2
        )));
    }
    if !(f0 >= T::zero() && f0.is_finite()) {
        return Err(ControlError::Numerics {
            step: DesignStep::SecondCoupling,
            source: NumericsError::NonFinite,
        });
    }
    let (p, k) = design_feedback(plant, q, cfg)?;
    let l2: T = lambda2(g, cfg).map_err(|source| ControlError::Graph {
        step: DesignStep::FirstCoupling,
        source,
    })?;
    let c1 = T::lit(margins.c1) / (T::lit(2.0) * l2);
    let c2 = T::lit(margins.c2) * f0 * T::from_count(g.n_nodes() - 1);
    Ok(StaticGains {
        k,
        c1,
        c2,
        layer,
        p,
    })
}

/// Rates of the σ-modified adaptation laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationRates<T> {
    pub mu: T,
    pub nu: T,
    pub theta: T,
    pub chi: T,
}

/// Constants of the adaptive law.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveParams<T> {
    pub k: Matrix<T>,
    /// `Γ = PBBᵀP`.
    pub gamma: Matrix<T>,
    pub rates: AdaptationRates<T>,
    pub layer: BoundaryLayer<T>,
    /// Initial `α_e`, one per edge in graph order.
    pub alpha0: Vec<T>,
    pub beta0: Vec<T>,
    pub p: Matrix<T>,
}

impl<T: Scalar> AdaptiveParams<T> {
    /// Builds `K = -BᵀP` and `Γ = PBBᵀP` from an ARE solution.
    pub fn new(
        p: Matrix<T>,
        b: &Matrix<T>,
        rates: AdaptationRates<T>,
        layer: BoundaryLayer<T>,
        alpha0: Vec<T>,
        beta0: Vec<T>,
    ) -> Result<Self, ControlError> {
        let AdaptationRates { mu, nu, theta, chi } = rates;
        for (name, v) in [("mu", mu), ("nu", nu)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        // zero leakage is allowed (pure integral adaptation), negative is not
        for (name, v) in [("theta", theta), ("chi", chi)] {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if alpha0.len() != beta0.len() {
            return Err(invalid("alpha0 and beta0 differ in length"));
        }
        if alpha0.iter().chain(&beta0).any(|v| !v.is_finite()) {
            return Err(invalid("initial edge gains must be finite"));
        }
        let bt_p = &b.transpose() * &p;
        let gamma = &bt_p.transpose() * &bt_p;
        Ok(Self {
            k: bt_p.scale(-T::one()),
            gamma,
            rates,
            layer,
            alpha0,
            beta0,
            p,
        })
    }

    /// `Γ` rebuilt as `KᵀK`, kept separate to check consistency.
    pub fn gamma_from_k(&self) -> Matrix<T> {
        &self.k.transpose() * &self.k
    }
}

/// Per-edge adaptive gains, indexed like `Graph::edges`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGains<T> {
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
}

/// Snapshot of the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState<T> {
    pub t: T,
    /// `x_i` per agent.
    pub x: Vec<Vec<T>>,
    /// Present iff the run is adaptive.
    pub gains: Option<EdgeGains<T>>,
}

impl<T: Scalar> NetworkState<T> {
    pub fn is_finite(&self) -> bool {
        let xs = self.x.iter().flatten();
        match &self.gains {
            Some(g) => xs.chain(&g.alpha).chain(&g.beta).all(|v| v.is_finite()),
            None => xs.copied().all(T::is_finite),
        }
    }
}

/// Coupling nonlinearity applied to `w = K(x_i - x_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Nonlinearity<T> {
    Smooth(BoundaryLayer<T>),
    Sign,
}

/// Coupling weights: either uniform `(c1, c2)` or per-edge `(α_e, β_e)`.
pub(crate) enum Weights<'a, T> {
    Uniform(T, T),
    PerEdge(&'a [T], &'a [T]),
}

impl<T: Scalar> Weights<'_, T> {
    fn get(&self, e: usize) -> (T, T) {
        match self {
            Self::Uniform(a, b) => (*a, *b),
            Self::PerEdge(a, b) => (a[e], b[e]),
        }
    }
}

/// Shared pieces of every agent vector field, for flat state slices.
pub(crate) struct Coupling<'a, T> {
    pub graph: &'a Graph,
    pub refs: &'a ReferenceSet<T>,
    pub k: &'a Matrix<T>,
    pub nonlinearity: Nonlinearity<T>,
}

impl<T: Scalar> Coupling<'_, T> {
    /// Writes the agent part of the field into `dx` (length `N·n`).
    ///
    /// `u_i = Σ_{j∈N_i} [a_ij K(x_i - x_j) + b_ij h(K(x_i - x_j))]` and
    /// `ẋ_i = A x_i + B (u_i + f_i)`. If `edge_terms` is given, it receives
    /// `(‖w_e‖, ‖w_e‖²/(‖w_e‖ + εe^{-φt}))` per edge for the adaptation laws.
    pub fn agents(
        &self,
        t: T,
        x: &[T],
        weights: Weights<'_, T>,
        dx: &mut [T],
        mut edge_terms: Option<&mut [T]>,
    ) {
        let plant = self.refs.plant();
        let (n, m) = (plant.state_dim(), plant.input_dim());
        let n_agents = self.graph.n_nodes();
        let mut u = vec![T::zero(); n_agents * m];
        let mut d = vec![T::zero(); n];
        let mut w = vec![T::zero(); m];
        let mut f = vec![T::zero(); m];
        let width = match self.nonlinearity {
            Nonlinearity::Smooth(layer) => layer.width(t),
            Nonlinearity::Sign => T::zero(),
        };
        for (e, &(i, j)) in self.graph.edges().iter().enumerate() {
            for r in 0..n {
                d[r] = x[i * n + r] - x[j * n + r];
            }
            w.iter_mut().for_each(|v| *v = T::zero());
            self.k.mul_vec_acc(&d, &mut w);
            let wn = norm(&w);
            let hs = match self.nonlinearity {
                Nonlinearity::Smooth(_) => T::one() / (wn + width),
                Nonlinearity::Sign if wn > T::lit(1e-15) => T::one() / wn,
                Nonlinearity::Sign => T::zero(),
            };
            let (a, b) = weights.get(e);
            let s = a + b * hs;
            for c in 0..m {
                let v = s * w[c];
                u[i * m + c] += v;
                u[j * m + c] -= v;
            }
            if let Some(out) = edge_terms.as_deref_mut() {
                out[2 * e] = wn;
                out[2 * e + 1] = wn * wn * hs;
            }
        }
        for i in 0..n_agents {
            let xi = &x[i * n..(i + 1) * n];
            let out = &mut dx[i * n..(i + 1) * n];
            out.iter_mut().for_each(|v| *v = T::zero());
            plant.a().mul_vec_acc(xi, out);
            self.refs.input_into(i, t, &mut f);
            let ui = &mut u[i * m..(i + 1) * m];
            for (uc, &fc) in ui.iter_mut().zip(&f) {
                *uc += fc;
            }
            plant.b().mul_vec_acc(ui, out);
        }
    }
}

fn check_dims<T: Scalar>(state: &NetworkState<T>, rs: &ReferenceSet<T>, g: &Graph) {
    assert_eq!(state.x.len(), g.n_nodes(), "state has wrong agent count");
    assert_eq!(
        rs.n_agents(),
        g.n_nodes(),
        "reference set has wrong agent count"
    );
}

fn flatten<T: Copy>(x: &[Vec<T>]) -> Vec<T> {
    x.iter().flatten().copied().collect()
}

fn unflatten<T: Copy>(flat: &[T], n: usize) -> Vec<Vec<T>> {
    flat.chunks(n).map(<[T]>::to_vec).collect()
}

/// Time derivative of the static closed loop. `gains` is `None` in the result.
///
/// # Panics
/// If the agent counts of `state`, `rs` and `g` differ.
pub fn static_rhs<T: Scalar>(
    state: &NetworkState<T>,
    rs: &ReferenceSet<T>,
    gains: &StaticGains<T>,
    g: &Graph,
) -> NetworkState<T> {
    rhs_with(state, rs, gains, g, Nonlinearity::Smooth(gains.layer))
}

/// As [`static_rhs`] with `h` replaced by [`discontinuous_sign`].
pub fn discontinuous_rhs<T: Scalar>(
    state: &NetworkState<T>,
    rs: &ReferenceSet<T>,
    gains: &StaticGains<T>,
    g: &Graph,
) -> NetworkState<T> {
    rhs_with(state, rs, gains, g, Nonlinearity::Sign)
}

fn rhs_with<T: Scalar>(
    state: &NetworkState<T>,
    rs: &ReferenceSet<T>,
    gains: &StaticGains<T>,
    g: &Graph,
    nonlinearity: Nonlinearity<T>,
) -> NetworkState<T> {
    check_dims(state, rs, g);
    let n = rs.plant().state_dim();
    let x = flatten(&state.x);
    let mut dx = vec![T::zero(); x.len()];
    let coupling = Coupling {
        graph: g,
        refs: rs,
        k: &gains.k,
        nonlinearity,
    };
    coupling.agents(
        state.t,
        &x,
        Weights::Uniform(gains.c1, gains.c2),
        &mut dx,
        None,
    );
    NetworkState {
        t: state.t,
        x: unflatten(&dx, n),
        gains: None,
    }
}

/// Adaptation laws given per-edge `(‖Kd‖, ‖Kd‖²/(‖Kd‖+εe^{-φt}))` pairs and
/// the quadratic forms `dᵀΓd`.
pub(crate) fn adaptation<T: Scalar>(
    rates: &AdaptationRates<T>,
    alpha: &[T],
    beta: &[T],
    quad: &[T],
    edge_terms: &[T],
    dalpha: &mut [T],
    dbeta: &mut [T],
) {
    for e in 0..alpha.len() {
        dalpha[e] = rates.mu * (-rates.theta * alpha[e] + quad[e]);
        dbeta[e] = rates.nu * (-rates.chi * beta[e] + edge_terms[2 * e + 1]);
    }
}

/// `dᵀΓd` with `d = x_i - x_j` for every edge.
pub(crate) fn edge_quadratic_forms<T: Scalar>(
    g: &Graph,
    gamma: &Matrix<T>,
    x: &[T],
    n: usize,
    out: &mut [T],
) {
    let mut d = vec![T::zero(); n];
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        for r in 0..n {
            d[r] = x[i * n + r] - x[j * n + r];
        }
        // Γ is PSD; cancellation can leave a tiny negative value
        out[e] = gamma.quadratic_form(&d).max(T::zero());
    }
}

/// Time derivative of the adaptive closed loop.
///
/// # Panics
/// If `state.gains` is `None` or dimensions disagree.
pub fn adaptive_rhs<T: Scalar>(
    state: &NetworkState<T>,
    rs: &ReferenceSet<T>,
    params: &AdaptiveParams<T>,
    g: &Graph,
) -> NetworkState<T> {
    check_dims(state, rs, g);
    let gains = state
        .gains
        .as_ref()
        .expect("adaptive state carries edge gains");
    let n = rs.plant().state_dim();
    let n_edges = g.n_edges();
    let x = flatten(&state.x);
    let mut dx = vec![T::zero(); x.len()];
    let mut terms = vec![T::zero(); 2 * n_edges];
    let coupling = Coupling {
        graph: g,
        refs: rs,
        k: &params.k,
        nonlinearity: Nonlinearity::Smooth(params.layer),
    };
    coupling.agents(
        state.t,
        &x,
        Weights::PerEdge(&gains.alpha, &gains.beta),
        &mut dx,
        Some(&mut terms),
    );
    let mut quad = vec![T::zero(); n_edges];
    edge_quadratic_forms(g, &params.gamma, &x, n, &mut quad);
    let mut dalpha = vec![T::zero(); n_edges];
    let mut dbeta = vec![T::zero(); n_edges];
    adaptation(
        &params.rates,
        &gains.alpha,
        &gains.beta,
        &quad,
        &terms,
        &mut dalpha,
        &mut dbeta,
    );
    NetworkState {
        t: state.t,
        x: unflatten(&dx, n),
        gains: Some(EdgeGains {
            alpha: dalpha,
            beta: dbeta,
        }),
    }
}
