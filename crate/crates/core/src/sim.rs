//! Deterministic fixed-step integration of the closed-loop network.
//!
//! The recorded grid is always `t_k = k·dt`. Late in a boundary-layer run the
//! smoothing width `εe^{-φt}` shrinks and the coupling's local Lipschitz
//! constant grows like `c2/(εe^{-φt})`; a plain step of size `dt` then loses
//! stability and the agents oscillate at step scale. Each outer step is
//! therefore split into `s` equal substeps, where `s` is a deterministic
//! function of the state at the start of the step (see
//! [`SimConfig::stiffness_target`]). Discontinuous runs are never subdivided.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{
    adaptation, edge_quadratic_forms, AdaptiveParams, Algorithm, ControlError, Coupling, EdgeGains,
    NetworkState, Nonlinearity, StaticGains, Weights,
};
use crate::graph::Graph;
use crate::matrix::norm;
use crate::scalar::Scalar;
use crate::signals::ReferenceSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Store every k-th step.
    pub record_every: usize,
    pub integrator: Integrator,
    /// Target for `h·L`, with `h` the substep and `L` the field's Lipschitz
    /// estimate. `None` disables substepping.
    pub stiffness_target: Option<f64>,
    pub max_substeps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_end: 20.0,
            dt: 1e-3,
            record_every: 10,
            integrator: Integrator::Rk4,
            stiffness_target: Some(1.0),
            max_substeps: 100_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return bad(format!(
                "t_end must be finite and >= dt, got {}",
                self.t_end
            ));
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1".into());
        }
        if let Some(s) = self.stiffness_target {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("stiffness_target must be positive, got {s}"));
            }
        }
        if self.max_substeps == 0 {
            return bad("max_substeps must be >= 1".into());
        }
        Ok(())
    }

    /// Number of `dt` steps: `t_end/dt` rounded up to a multiple of `record_every`,
    /// so the last step is always recorded.
    pub fn n_steps(&self) -> usize {
        let raw = self.t_end / self.dt;
        let near = raw.round();
        let steps = if (raw - near).abs() <= 1e-9 * near.max(1.0) {
            near as usize
        } else {
            raw.ceil() as usize
        };
        steps.max(1).div_ceil(self.record_every) * self.record_every
    }
}

/// A time-varying vector field `y' = f(t, y)` on flat state vectors.
pub trait VectorField<T> {
    fn dim(&self) -> usize;
    fn eval(&self, t: T, y: &[T], dy: &mut [T]);
    /// Estimate of the local Lipschitz constant at `(t, y)`; `None` opts out of
    /// substepping.
    fn stiffness(&self, _t: T, _y: &[T]) -> Option<T> {
        None
    }
}

/// Adapts a closure to [`VectorField`].
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<T, F: Fn(T, &[T], &mut [T])> VectorField<T> for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: T, y: &[T], dy: &mut [T]) {
        (self.f)(t, y, dy)
    }
}

/// Raw integration output on the recorded grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    /// Total substeps taken (equal to the step count when none were split).
    pub substeps: usize,
}

struct Stepper<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Stepper<T> {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![T::zero(); n],
            k2: vec![T::zero(); n],
            k3: vec![T::zero(); n],
            k4: vec![T::zero(); n],
            tmp: vec![T::zero(); n],
        }
    }

    fn step<F: VectorField<T> + ?Sized>(
        &mut self,
        f: &F,
        method: Integrator,
        t: T,
        h: T,
        y: &mut [T],
    ) {
        match method {
            Integrator::Euler => {
                f.eval(t, y, &mut self.k1);
                for (yi, ki) in y.iter_mut().zip(&self.k1) {
                    *yi += h * *ki;
                }
            }
            Integrator::Rk4 => {
                let half = h / T::lit(2.0);
                f.eval(t, y, &mut self.k1);
                for i in 0..y.len() {
                    self.tmp[i] = y[i] + half * self.k1[i];
                }
                f.eval(t + half, &self.tmp, &mut self.k2);
                for i in 0..y.len() {
                    self.tmp[i] = y[i] + half * self.k2[i];
                }
                f.eval(t + half, &self.tmp, &mut self.k3);
                for i in 0..y.len() {
                    self.tmp[i] = y[i] + h * self.k3[i];
                }
                f.eval(t + h, &self.tmp, &mut self.k4);
                let sixth = h / T::lit(6.0);
                let two = T::lit(2.0);
                for i in 0..y.len() {
                    y[i] += sixth * (self.k1[i] + two * (self.k2[i] + self.k3[i]) + self.k4[i]);
                }
            }
        }
    }
}

/// Integrates `f` from `y0` at `t = 0` on the grid of `cfg`.
pub fn integrate<T: Scalar, F: VectorField<T> + ?Sized>(
    f: &F,
    y0: &[T],
    cfg: &SimConfig,
) -> Result<Samples<T>, SimError> {
    cfg.validate()?;
    if y0.len() != f.dim() {
        return Err(SimError::InvalidConfig(format!(
            "initial state has length {} but the field has dimension {}",
            y0.len(),
            f.dim()
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFinite { t: 0.0 });
    }
    let n_steps = cfg.n_steps();
    let dt = T::lit(cfg.dt);
    let mut y = y0.to_vec();
    let mut stepper = Stepper::new(y.len());
    let mut times = Vec::with_capacity(n_steps / cfg.record_every + 1);
    let mut states = Vec::with_capacity(n_steps / cfg.record_every + 1);
    times.push(T::zero());
    states.push(y.clone());
    let mut substeps = 0;
    for k in 0..n_steps {
        let t0 = T::from_count(k) * dt;
        let s = substep_count(f, cfg, t0, &y);
        let h = dt / T::from_count(s);
        for j in 0..s {
            let t = t0 + T::from_count(j) * h;
            stepper.step(f, cfg.integrator, t, h, &mut y);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonFinite {
                    t: (t + h).as_f64(),
                });
            }
        }
        substeps += s;
        if (k + 1) % cfg.record_every == 0 {
            times.push(T::from_count(k + 1) * dt);
            states.push(y.clone());
        }
    }
    Ok(Samples {
        times,
        states,
        substeps,
    })
}

fn substep_count<T: Scalar, F: VectorField<T> + ?Sized>(
    f: &F,
    cfg: &SimConfig,
    t: T,
    y: &[T],
) -> usize {
    let (Some(target), Some(l)) = (cfg.stiffness_target, f.stiffness(t, y)) else {
        return 1;
    };
    let want = (cfg.dt * l.as_f64() / target).ceil();
    if !want.is_finite() || want >= cfg.max_substeps as f64 {
        return cfg.max_substeps;
    }
    (want as usize).max(1)
}

/// A designed controller.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller<T> {
    Static(StaticGains<T>),
    Discontinuous(StaticGains<T>),
    Adaptive(AdaptiveParams<T>),
}

impl<T> Controller<T> {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Self::Static(_) => Algorithm::Static,
            Self::Discontinuous(_) => Algorithm::Discontinuous,
            Self::Adaptive(_) => Algorithm::Adaptive,
        }
    }
}

/// Everything a run needs besides the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem<T> {
    pub graph: Graph,
    pub refs: ReferenceSet<T>,
    pub controller: Controller<T>,
}

impl<T: Scalar> Problem<T> {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        let (n_agents, n_edges) = (self.refs.n_agents(), self.graph.n_edges());
        if self.graph.n_nodes() != n_agents {
            return Err(ControlError::AgentCount {
                graph: self.graph.n_nodes(),
                agents: n_agents,
            }
            .into());
        }
        let plant = self.refs.plant();
        let k = self.gain();
        if k.shape() != (plant.input_dim(), plant.state_dim()) {
            return bad(format!(
                "K is {}x{} but the plant needs {}x{}",
                k.rows(),
                k.cols(),
                plant.input_dim(),
                plant.state_dim()
            ));
        }
        if let Controller::Adaptive(p) = &self.controller {
            if p.alpha0.len() != n_edges || p.beta0.len() != n_edges {
                return bad(format!(
                    "{} initial edge gains for {n_edges} edges",
                    p.alpha0.len()
                ));
            }
        }
        Ok(())
    }

    pub fn gain(&self) -> &crate::matrix::Matrix<T> {
        match &self.controller {
            Controller::Static(g) | Controller::Discontinuous(g) => &g.k,
            Controller::Adaptive(p) => &p.k,
        }
    }

    /// Flat layout `[x_1..x_N | α_e | β_e | r_1..r_N]`; the edge blocks are
    /// empty for non-adaptive runs.
    fn layout(&self) -> Layout {
        let n = self.refs.plant().state_dim();
        let agents = self.refs.n_agents() * n;
        let edges = match self.controller {
            Controller::Adaptive(_) => self.graph.n_edges(),
            _ => 0,
        };
        Layout { n, agents, edges }
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    agents: usize,
    edges: usize,
}

impl Layout {
    fn alpha(&self) -> std::ops::Range<usize> {
        self.agents..self.agents + self.edges
    }
    fn beta(&self) -> std::ops::Range<usize> {
        self.agents + self.edges..self.agents + 2 * self.edges
    }
    fn refs(&self) -> std::ops::Range<usize> {
        let s = self.agents + 2 * self.edges;
        s..s + self.agents
    }
    fn dim(&self) -> usize {
        2 * self.agents + 2 * self.edges
    }
}

/// The closed loop plus co-integrated references as one [`VectorField`].
pub struct NetworkField<'a, T> {
    problem: &'a Problem<T>,
    layout: Layout,
    a_norm: T,
    bk_norm: T,
    degree_bound: T,
}

impl<'a, T: Scalar> NetworkField<'a, T> {
    pub fn new(problem: &'a Problem<T>) -> Result<Self, SimError> {
        problem.validate()?;
        let plant = problem.refs.plant();
        Ok(Self {
            problem,
            layout: problem.layout(),
            a_norm: plant.a().frobenius_norm(),
            bk_norm: plant.b().frobenius_norm() * problem.gain().frobenius_norm(),
            // λ_max(L) ≤ 2·max degree
            degree_bound: T::from_count(2 * problem.graph.max_degree()),
        })
    }

    fn coupling(&self, nonlinearity: Nonlinearity<T>) -> Coupling<'_, T> {
        Coupling {
            graph: &self.problem.graph,
            refs: &self.problem.refs,
            k: self.problem.gain(),
            nonlinearity,
        }
    }

    /// `max_e b_e/(‖K d_e‖ + width)` and `max_e ‖d_e‖`.
    fn edge_extremes(&self, y: &[T], b: impl Fn(usize) -> T, width: T) -> (T, T) {
        let n = self.layout.n;
        let k = self.problem.gain();
        let mut d = vec![T::zero(); n];
        let mut w = vec![T::zero(); k.rows()];
        let (mut slope, mut dmax) = (T::zero(), T::zero());
        for (e, &(i, j)) in self.problem.graph.edges().iter().enumerate() {
            for r in 0..n {
                d[r] = y[i * n + r] - y[j * n + r];
            }
            w.fill(T::zero());
            k.mul_vec_acc(&d, &mut w);
            slope = slope.max(b(e) / (norm(&w) + width));
            dmax = dmax.max(norm(&d));
        }
        (slope, dmax)
    }
}

impl<T: Scalar> VectorField<T> for NetworkField<'_, T> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn eval(&self, t: T, y: &[T], dy: &mut [T]) {
        let lay = self.layout;
        let (x, rest) = y.split_at(lay.agents);
        let (dx, drest) = dy.split_at_mut(lay.agents);
        match &self.problem.controller {
            Controller::Static(g) => {
                let c = self.coupling(Nonlinearity::Smooth(g.layer));
                c.agents(t, x, Weights::Uniform(g.c1, g.c2), dx, None);
            }
            Controller::Discontinuous(g) => {
                let c = self.coupling(Nonlinearity::Sign);
                c.agents(t, x, Weights::Uniform(g.c1, g.c2), dx, None);
            }
            Controller::Adaptive(p) => {
                let e = lay.edges;
                let (alpha, beta) = rest[..2 * e].split_at(e);
                let mut terms = vec![T::zero(); 2 * e];
                let c = self.coupling(Nonlinearity::Smooth(p.layer));
                c.agents(t, x, Weights::PerEdge(alpha, beta), dx, Some(&mut terms));
                let mut quad = vec![T::zero(); e];
                edge_quadratic_forms(&self.problem.graph, &p.gamma, x, lay.n, &mut quad);
                let (dalpha, dbeta) = drest[..2 * e].split_at_mut(e);
                adaptation(&p.rates, alpha, beta, &quad, &terms, dalpha, dbeta);
            }
        }
        let refs = &self.problem.refs;
        let plant = refs.plant();
        let n = lay.n;
        let r = &y[lay.refs()];
        let dr = &mut dy[lay.refs()];
        let mut f = vec![T::zero(); plant.input_dim()];
        for i in 0..refs.n_agents() {
            let out = &mut dr[i * n..(i + 1) * n];
            out.iter_mut().for_each(|v| *v = T::zero());
            plant.a().mul_vec_acc(&r[i * n..(i + 1) * n], out);
            refs.input_into(i, t, &mut f);
            plant.b().mul_vec_acc(&f, out);
        }
    }

    fn stiffness(&self, t: T, y: &[T]) -> Option<T> {
        let coupling =
            |lin: T, slope: T| self.a_norm + self.bk_norm * self.degree_bound * (lin + slope);
        match &self.problem.controller {
            Controller::Discontinuous(_) => None,
            Controller::Static(g) => {
                let (slope, _) = self.edge_extremes(y, |_| g.c2, g.layer.width(t));
                Some(coupling(g.c1, slope))
            }
            Controller::Adaptive(p) => {
                let lay = self.layout;
                let alpha = &y[lay.alpha()];
                let beta = &y[lay.beta()];
                let amax = alpha.iter().copied().fold(T::zero(), T::max);
                let (slope, dmax) =
                    self.edge_extremes(y, |e| beta[e].max(T::zero()), p.layer.width(t));
                let r = p.rates;
                let two = T::lit(2.0);
                let gains = r.mu * (r.theta + two * two * p.gamma.frobenius_norm() * dmax)
                    + r.nu * (r.chi + two * self.bk_norm);
                Some(coupling(amax, slope) + gains)
            }
        }
    }
}

/// A recorded closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub algorithm: Algorithm,
    pub dt: T,
    pub record_every: usize,
    pub times: Vec<T>,
    pub states: Vec<NetworkState<T>>,
    /// `r_i(t_k)` per recorded time, co-integrated with the network.
    pub references: Vec<Vec<Vec<T>>>,
    pub substeps: usize,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(&NetworkState<T>, &[Vec<T>])> {
        Some((self.states.last()?, self.references.last()?))
    }
}

/// Runs the closed loop from `x_i(0) = r_i(0)` (zero filter state) and, in
/// adaptive mode, the configured initial edge gains.
pub fn run<T: Scalar>(problem: &Problem<T>, cfg: &SimConfig) -> Result<Trajectory<T>, SimError> {
    let field = NetworkField::new(problem)?;
    let lay = field.layout;
    let r0: Vec<T> = problem
        .refs
        .initial_states()
        .iter()
        .flatten()
        .copied()
        .collect();
    let mut y0 = Vec::with_capacity(lay.dim());
    y0.extend_from_slice(&r0);
    if let Controller::Adaptive(p) = &problem.controller {
        y0.extend_from_slice(&p.alpha0);
        y0.extend_from_slice(&p.beta0);
    }
    y0.extend_from_slice(&r0);
    let samples = integrate(&field, &y0, cfg)?;
    let n = lay.n;
    let split = |flat: &[T]| -> Vec<Vec<T>> { flat.chunks(n).map(<[T]>::to_vec).collect() };
    let mut states = Vec::with_capacity(samples.states.len());
    let mut references = Vec::with_capacity(samples.states.len());
    for (&t, y) in samples.times.iter().zip(&samples.states) {
        let gains = matches!(problem.controller, Controller::Adaptive(_)).then(|| EdgeGains {
            alpha: y[lay.alpha()].to_vec(),
            beta: y[lay.beta()].to_vec(),
        });
        states.push(NetworkState {
            t,
            x: split(&y[..lay.agents]),
            gains,
        });
        references.push(split(&y[lay.refs()]));
    }
    Ok(Trajectory {
        algorithm: problem.controller.algorithm(),
        dt: T::lit(cfg.dt),
        record_every: cfg.record_every,
        times: samples.times,
        states,
        references,
        substeps: samples.substeps,
    })
}
