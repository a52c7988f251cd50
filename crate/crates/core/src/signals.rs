//! Reference-signal models `ṙ_i = A r_i + B f_i(t)`.
//!
//! Inputs are closed-form descriptors rather than callbacks so that scenario
//! files stay serializable and the bound `f0 ≥ sup_t ‖f_i(t)‖` is computable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{norm, Matrix};
use crate::numerics::{matrix_exp, NumericsError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("A must be square, got {0}x{1}")]
    NonSquareA(usize, usize),
    #[error("B has {b_rows} rows but A is {n}x{n}")]
    InputMatrixRows { b_rows: usize, n: usize },
    #[error("agent {agent}: initial state has length {found}, expected {expected}")]
    InitialStateDim {
        agent: usize,
        found: usize,
        expected: usize,
    },
    #[error("agent {agent}: input has dimension {found}, expected {expected}")]
    InputDim {
        agent: usize,
        found: usize,
        expected: usize,
    },
    #[error("agent {agent}: invalid input table: {reason}")]
    BadTable { agent: usize, reason: String },
    #[error("agent {agent}: non-finite input parameters")]
    NonFiniteInput { agent: usize },
    #[error("reference set needs at least one agent and matching input count ({states} states, {inputs} inputs)")]
    AgentCount { states: usize, inputs: usize },
    #[error("agent index {0} out of range")]
    AgentIndex(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// The pair `(A, B)` shared by every reference signal and agent.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant<T> {
    a: Matrix<T>,
    b: Matrix<T>,
}

impl<T: Scalar> LinearPlant<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>) -> Result<Self, SignalError> {
        if !a.is_square() {
            return Err(SignalError::NonSquareA(a.rows(), a.cols()));
        }
        if b.rows() != a.rows() {
            return Err(SignalError::InputMatrixRows {
                b_rows: b.rows(),
                n: a.rows(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &Matrix<T> {
        &self.b
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    /// Input dimension `m`.
    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }
}

/// Closed-form description of one bounded input signal `f_i(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InputDescriptor<T> {
    /// Identically zero. `dim = 0` means "the plant's input dimension".
    Zero {
        #[serde(default)]
        dim: usize,
    },
    Constant {
        value: Vec<T>,
    },
    /// `amp · sin(omega·t + phase)`.
    Sinusoid {
        amp: Vec<T>,
        omega: T,
        phase: T,
    },
    /// Piecewise-linear interpolation of samples; outside the grid the
    /// nearest end value is held.
    Table {
        times: Vec<T>,
        values: Vec<Vec<T>>,
    },
}

/// Value of an input together with whether a table was evaluated off-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSample<T> {
    pub value: Vec<T>,
    /// `true` when a table input was held at an end value because `t` lay
    /// outside its grid.
    pub held: bool,
}

impl<T: Scalar> InputDescriptor<T> {
    pub fn sinusoid(amp: Vec<T>, omega: T, phase: T) -> Self {
        Self::Sinusoid { amp, omega, phase }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Zero { dim } => *dim,
            Self::Constant { value } => value.len(),
            Self::Sinusoid { amp, .. } => amp.len(),
            Self::Table { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    /// Declared bound on `‖f(t)‖` over `t ≥ 0`; exact for the parametric kinds,
    /// max over samples for tables.
    pub fn bound(&self) -> T {
        match self {
            Self::Zero { .. } => T::zero(),
            Self::Constant { value } => norm(value),
            Self::Sinusoid { amp, omega, phase } => {
                if *omega == T::zero() {
                    norm(amp) * phase.sin().abs()
                } else {
                    norm(amp)
                }
            }
            Self::Table { values, .. } => values.iter().map(|v| norm(v)).fold(T::zero(), T::max),
        }
    }

    fn validate(&self, agent: usize, m: usize) -> Result<Self, SignalError> {
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        let resolved = match self {
            Self::Zero { dim } if *dim == 0 => Self::Zero { dim: m },
            Self::Sinusoid { amp, omega, phase } => {
                if !finite(amp) || !omega.is_finite() || !phase.is_finite() {
                    return Err(SignalError::NonFiniteInput { agent });
                }
                self.clone()
            }
            Self::Constant { value } => {
                if !finite(value) {
                    return Err(SignalError::NonFiniteInput { agent });
                }
                self.clone()
            }
            Self::Table { times, values } => {
                let bad = |reason: &str| SignalError::BadTable {
                    agent,
                    reason: reason.to_string(),
                };
                if times.is_empty() {
                    return Err(bad("empty grid"));
                }
                if times.len() != values.len() {
                    return Err(bad("times and values differ in length"));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(bad("times must be strictly increasing"));
                }
                if values.iter().any(|v| v.len() != m) {
                    return Err(SignalError::InputDim {
                        agent,
                        found: values.iter().map(Vec::len).find(|&l| l != m).unwrap_or(0),
                        expected: m,
                    });
                }
                if !finite(times) || values.iter().any(|v| !finite(v)) {
                    return Err(SignalError::NonFiniteInput { agent });
                }
                self.clone()
            }
            Self::Zero { .. } => self.clone(),
        };
        if resolved.dim() != m {
            return Err(SignalError::InputDim {
                agent,
                found: resolved.dim(),
                expected: m,
            });
        }
        Ok(resolved)
    }
}

/// Evaluates an input at time `t`.
pub fn eval_input<T: Scalar>(d: &InputDescriptor<T>, t: T) -> InputSample<T> {
    let mut value = vec![T::zero(); d.dim()];
    let held = eval_input_into(d, t, &mut value);
    InputSample { value, held }
}

/// Writes `f(t)` into `out` (length `d.dim()`); returns the `held` flag.
pub fn eval_input_into<T: Scalar>(d: &InputDescriptor<T>, t: T, out: &mut [T]) -> bool {
    match d {
        InputDescriptor::Zero { .. } => {
            out.fill(T::zero());
            false
        }
        InputDescriptor::Constant { value } => {
            out.copy_from_slice(value);
            false
        }
        InputDescriptor::Sinusoid { amp, omega, phase } => {
            let s = (*omega * t + *phase).sin();
            for (o, &a) in out.iter_mut().zip(amp) {
                *o = a * s;
            }
            false
        }
        InputDescriptor::Table { times, values } => {
            let last = times.len() - 1;
            if t < times[0] {
                out.copy_from_slice(&values[0]);
                return true;
            }
            if t > times[last] {
                out.copy_from_slice(&values[last]);
                return true;
            }
            // first index with times[k] >= t
            let k = times.partition_point(|&s| s < t);
            if k == 0 || times[k] == t {
                out.copy_from_slice(&values[k]);
                return false;
            }
            let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
            for ((o, &a), &b) in out.iter_mut().zip(&values[k - 1]).zip(&values[k]) {
                *o = a + w * (b - a);
            }
            false
        }
    }
}

/// `N` reference signals sharing one plant.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet<T> {
    plant: LinearPlant<T>,
    initial_states: Vec<Vec<T>>,
    inputs: Vec<InputDescriptor<T>>,
}

impl<T: Scalar> ReferenceSet<T> {
    pub fn new(
        plant: LinearPlant<T>,
        initial_states: Vec<Vec<T>>,
        inputs: Vec<InputDescriptor<T>>,
    ) -> Result<Self, SignalError> {
        if initial_states.is_empty() || initial_states.len() != inputs.len() {
            return Err(SignalError::AgentCount {
                states: initial_states.len(),
                inputs: inputs.len(),
            });
        }
        let (n, m) = (plant.state_dim(), plant.input_dim());
        for (agent, r0) in initial_states.iter().enumerate() {
            if r0.len() != n {
                return Err(SignalError::InitialStateDim {
                    agent,
                    found: r0.len(),
                    expected: n,
                });
            }
        }
        let inputs = inputs
            .iter()
            .enumerate()
            .map(|(agent, d)| d.validate(agent, m))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            plant,
            initial_states,
            inputs,
        })
    }

    pub fn plant(&self) -> &LinearPlant<T> {
        &self.plant
    }

    pub fn n_agents(&self) -> usize {
        self.initial_states.len()
    }

    pub fn initial_states(&self) -> &[Vec<T>] {
        &self.initial_states
    }

    pub fn inputs(&self) -> &[InputDescriptor<T>] {
        &self.inputs
    }

    /// `f_i(t)`.
    pub fn input(&self, i: usize, t: T) -> Vec<T> {
        eval_input(&self.inputs[i], t).value
    }

    /// Writes `f_i(t)` into `out`.
    pub fn input_into(&self, i: usize, t: T, out: &mut [T]) {
        eval_input_into(&self.inputs[i], t, out);
    }

    /// `f0 = max_i f0_i`.
    pub fn input_bound(&self) -> T {
        self.inputs
            .iter()
            .map(InputDescriptor::bound)
            .fold(T::zero(), T::max)
    }
}

/// Default Simpson panel count for the oracle at horizon `t`: 2000 per unit time.
pub fn default_quad_steps<T: Scalar>(t: T) -> usize {
    ((t.as_f64() * 2000.0).ceil() as usize).max(1)
}

/// `r_i(t) = e^{At} r_i(0) + ∫₀ᵗ e^{A(t-τ)} B f_i(τ) dτ`, with the integral by
/// composite Simpson on `quad_steps` panels.
pub fn reference_trajectory<T: Scalar>(
    rs: &ReferenceSet<T>,
    i: usize,
    t: T,
    quad_steps: usize,
) -> Result<Vec<T>, SignalError> {
    if i >= rs.n_agents() {
        return Err(SignalError::AgentIndex(i));
    }
    let plant = rs.plant();
    let mut out = matrix_exp(plant.a(), t)?.mul_vec(&rs.initial_states()[i]);
    let forced = forced_response(plant, &rs.inputs()[i], t, quad_steps)?;
    for (o, f) in out.iter_mut().zip(forced) {
        *o += f;
    }
    Ok(out)
}

/// `∫₀ᵗ e^{A(t-τ)} B f(τ) dτ` by composite Simpson.
///
/// Nodes sit at `τ_k = k·h/2`, `k = 0..=2q`. The sum `Σ w_k e^{A(t-τ_k)} B f(τ_k)`
/// is accumulated Horner-style with the single propagator `E = e^{A h/2}`.
pub(crate) fn forced_response<T: Scalar>(
    plant: &LinearPlant<T>,
    input: &InputDescriptor<T>,
    t: T,
    quad_steps: usize,
) -> Result<Vec<T>, SignalError> {
    let n = plant.state_dim();
    let q = quad_steps.max(1);
    if t == T::zero() || matches!(input, InputDescriptor::Zero { .. }) {
        return Ok(vec![T::zero(); n]);
    }
    let h = t / T::from_count(q);
    let half = h / T::lit(2.0);
    let prop = matrix_exp(plant.a(), half)?;
    let nodes = 2 * q;
    let mut acc = vec![T::zero(); n];
    for k in 0..=nodes {
        let w = if k == 0 || k == nodes {
            T::one()
        } else if k % 2 == 1 {
            T::lit(4.0)
        } else {
            T::lit(2.0)
        };
        let mut next = prop.mul_vec(&acc);
        let tau = half * T::from_count(k);
        let bf = plant.b().mul_vec(&eval_input(input, tau).value);
        for (a, v) in next.iter_mut().zip(bf) {
            *a += w * v;
        }
        acc = next;
    }
    let scale = h / T::lit(6.0);
    Ok(acc.into_iter().map(|v| v * scale).collect())
}
