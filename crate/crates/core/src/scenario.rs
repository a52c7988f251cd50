//! JSON scenario files and the bundled example scenarios.
//!
//! ```json
//! {
//!   "name": "demo",
//!   "graph": {"n": 3, "edges": [[0, 1], [1, 2]]},
//!   "A": [[0, 1], [-1, -2]], "B": [[0], [1]],
//!   "agents": [{"r0": [1, -1], "input": {"kind": "sinusoid", "amp": [1], "omega": 1, "phase": 0}}, ...],
//!   "algorithm": "static",
//!   "design": {"Q": [[1, 0], [0, 1]], "margins": {"c1": 1, "c2": 1}},
//!   "smoothing": {"eps": 5, "phi": 0.5},
//!   "sim": {"t_end": 20, "dt": 0.001, "record_every": 10}
//! }
//! ```
//!
//! Unknown keys are rejected everywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::AnalysisConfig;
use crate::control::{
    design_gains, AdaptationRates, AdaptiveParams, Algorithm, BoundaryLayer, ControlError, Margins,
};
use crate::graph::Graph;
use crate::matrix::{Matrix, ShapeError};
use crate::numerics::NumericsConfig;
use crate::scalar::Scalar;
use crate::signals::{InputDescriptor, LinearPlant, ReferenceSet, SignalError};
use crate::sim::{Controller, Problem, SimConfig, SimError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid JSON: {0}")]
    Parse(String),
    #[error("matrix {name}: {source}")]
    Shape {
        name: &'static str,
        #[source]
        source: ShapeError,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub r0: Vec<f64>,
    pub input: InputDescriptor<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    /// ARE weight; identity when absent.
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub margins: Margins,
}

/// Initial adaptive gains: one value for every edge, or one per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeInit {
    Uniform(f64),
    PerEdge(Vec<f64>),
}

impl Default for EdgeInit {
    fn default() -> Self {
        Self::Uniform(0.0)
    }
}

impl EdgeInit {
    fn expand(&self, n_edges: usize, name: &str) -> Result<Vec<f64>, ScenarioError> {
        match self {
            Self::Uniform(v) => Ok(vec![*v; n_edges]),
            Self::PerEdge(v) if v.len() == n_edges => Ok(v.clone()),
            Self::PerEdge(v) => invalid(format!(
                "{name} lists {} values for {n_edges} edges",
                v.len()
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveSpec {
    pub mu: f64,
    pub nu: f64,
    pub theta: f64,
    pub chi: f64,
    #[serde(default)]
    pub alpha0: EdgeInit,
    #[serde(default)]
    pub beta0: EdgeInit,
}

/// Uniform perturbation `r_i(0) += scale · U(-1, 1)` drawn from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInitial {
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Free-text notes on choices not fixed by the model (stand-ins etc.).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assumptions: Vec<String>,
    pub graph: Graph,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub agents: Vec<AgentSpec>,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub design: DesignSpec,
    pub smoothing: BoundaryLayer<f64>,
    /// Required iff `algorithm` is `adaptive`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<AdaptiveSpec>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_initial: Option<RandomInitial>,
}

/// A validated scenario with the controller designed.
#[derive(Debug, Clone, PartialEq)]
pub struct Built<T> {
    pub problem: Problem<T>,
    /// The ARE weight `K` was designed with.
    pub q: Matrix<T>,
    pub sim: SimConfig,
    pub analysis: AnalysisConfig,
    pub numerics: NumericsConfig,
}

fn matrix<T: Scalar>(rows: &[Vec<f64>], name: &'static str) -> Result<Matrix<T>, ScenarioError> {
    if rows.is_empty() || rows[0].is_empty() {
        return invalid(format!("matrix {name} is empty"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return invalid(format!("matrix {name} has non-finite entries"));
    }
    let m = Matrix::from_rows(rows).map_err(|source| ScenarioError::Shape { name, source })?;
    Ok(m.cast())
}

fn vector<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn cast_input<T: Scalar>(d: &InputDescriptor<f64>) -> InputDescriptor<T> {
    match d {
        InputDescriptor::Zero { dim } => InputDescriptor::Zero { dim: *dim },
        InputDescriptor::Constant { value } => InputDescriptor::Constant {
            value: vector(value),
        },
        InputDescriptor::Sinusoid { amp, omega, phase } => InputDescriptor::Sinusoid {
            amp: vector(amp),
            omega: T::lit(*omega),
            phase: T::lit(*phase),
        },
        InputDescriptor::Table { times, values } => InputDescriptor::Table {
            times: vector(times),
            values: values.iter().map(|v| vector(v)).collect(),
        },
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Initial reference states after the optional seeded perturbation.
    pub fn initial_states(&self) -> Vec<Vec<f64>> {
        let mut r0: Vec<Vec<f64>> = self.agents.iter().map(|a| a.r0.clone()).collect();
        if let Some(RandomInitial { scale }) = self.random_initial {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(0));
            for v in r0.iter_mut().flatten() {
                *v += scale * rng.gen_range(-1.0..=1.0);
            }
        }
        r0
    }

    /// Validates every cross-dimension and runs the gain design.
    pub fn build<T: Scalar>(&self) -> Result<Built<T>, ScenarioError> {
        let n_agents = self.agents.len();
        if n_agents < 2 {
            return invalid(format!("at least two agents are required, got {n_agents}"));
        }
        if self.graph.n_nodes() != n_agents {
            return invalid(format!(
                "graph has {} nodes but {n_agents} agents are listed",
                self.graph.n_nodes()
            ));
        }
        if let Some(RandomInitial { scale }) = self.random_initial {
            if !(scale >= 0.0 && scale.is_finite()) {
                return invalid(format!(
                    "random_initial.scale must be nonnegative, got {scale}"
                ));
            }
        }
        self.sim.validate()?;
        let a = matrix::<T>(&self.a, "A")?;
        let b = matrix::<T>(&self.b, "B")?;
        let plant = LinearPlant::new(a, b)?;
        let n = plant.state_dim();
        let q = match &self.design.q {
            Some(rows) => matrix::<T>(rows, "Q")?,
            None => Matrix::identity(n),
        };
        if q.shape() != (n, n) {
            return invalid(format!("Q is {}x{} but A is {n}x{n}", q.rows(), q.cols()));
        }
        let refs = ReferenceSet::new(
            plant.clone(),
            self.initial_states().iter().map(|v| vector(v)).collect(),
            self.agents.iter().map(|a| cast_input(&a.input)).collect(),
        )?;
        let layer = BoundaryLayer::new(T::lit(self.smoothing.eps), T::lit(self.smoothing.phi))?;
        if self.algorithm != Algorithm::Adaptive && self.adaptive.is_some() {
            return invalid(format!(
                "\"adaptive\" given but algorithm is {}",
                self.algorithm
            ));
        }
        let gains = design_gains(
            &plant,
            &self.graph,
            &q,
            refs.input_bound(),
            self.design.margins,
            layer,
            &self.numerics,
        )?;
        let controller = match self.algorithm {
            Algorithm::Static => Controller::Static(gains),
            Algorithm::Discontinuous => Controller::Discontinuous(gains),
            Algorithm::Adaptive => {
                let Some(spec) = &self.adaptive else {
                    return invalid("algorithm is adaptive but \"adaptive\" is missing");
                };
                let e = self.graph.n_edges();
                let rates = AdaptationRates {
                    mu: T::lit(spec.mu),
                    nu: T::lit(spec.nu),
                    theta: T::lit(spec.theta),
                    chi: T::lit(spec.chi),
                };
                Controller::Adaptive(AdaptiveParams::new(
                    gains.p,
                    plant.b(),
                    rates,
                    layer,
                    vector(&spec.alpha0.expand(e, "alpha0")?),
                    vector(&spec.beta0.expand(e, "beta0")?),
                )?)
            }
        };
        let problem = Problem {
            graph: self.graph.clone(),
            refs,
            controller,
        };
        problem.validate()?;
        Ok(Built {
            problem,
            q,
            sim: self.sim,
            analysis: self.analysis,
            numerics: self.numerics,
        })
    }
}

/// Names accepted by [`bundled`].
pub const BUNDLED: [&str; 4] = [
    "paper-sec5-static",
    "paper-sec5-adaptive",
    "twin-integrator",
    "ring-demo",
];

/// Built-in scenarios.
pub fn bundled(name: &str) -> Option<Scenario> {
    match name {
        "paper-sec5-static" => Some(sec5(Algorithm::Static)),
        "paper-sec5-adaptive" => Some(sec5(Algorithm::Adaptive)),
        "twin-integrator" => Some(twin_integrator()),
        "ring-demo" => Some(ring_demo()),
        _ => None,
    }
}

fn sinusoid(amp: Vec<f64>, omega: f64, phase: f64) -> InputDescriptor<f64> {
    InputDescriptor::Sinusoid { amp, omega, phase }
}

/// Six agents with the plant `A = [[0,1],[-1,-2]]`, `B = [0;1]` and inputs
/// `f_i = (i+1)/2 · sin t`.
fn sec5(algorithm: Algorithm) -> Scenario {
    let adaptive = (algorithm == Algorithm::Adaptive).then_some(AdaptiveSpec {
        mu: 10.0,
        nu: 10.0,
        theta: 0.01,
        chi: 0.01,
        alpha0: EdgeInit::Uniform(0.0),
        beta0: EdgeInit::Uniform(0.0),
    });
    Scenario {
        name: format!("paper-sec5-{algorithm}"),
        assumptions: vec![
            "topology: ring C6 (0-1-2-3-4-5-0) stands in for the unrecoverable six-node example graph".into(),
            "initial states: r_i(0) = (i, -i) for agents i = 1..6 (not stated in the source)".into(),
            "coupling margins 1.0: c1 = 1/(2 lambda2), c2 = f0 (N - 1)".into(),
            "horizon t_end = 20 and step dt = 1e-3 are not stated in the source".into(),
        ],
        graph: Graph::ring(6),
        a: vec![vec![0.0, 1.0], vec![-1.0, -2.0]],
        b: vec![vec![0.0], vec![1.0]],
        agents: (1..=6)
            .map(|i| AgentSpec {
                r0: vec![i as f64, -(i as f64)],
                input: sinusoid(vec![(i as f64 + 1.0) / 2.0], 1.0, 0.0),
            })
            .collect(),
        algorithm,
        design: DesignSpec::default(),
        smoothing: BoundaryLayer { eps: 5.0, phi: 0.5 },
        adaptive,
        sim: SimConfig::default(),
        analysis: AnalysisConfig::default(),
        numerics: NumericsConfig::default(),
        seed: None,
        random_initial: None,
    }
}

/// Double integrators: `A` is not Hurwitz, so tracking relies on the filter
/// starting at `s_i(0) = 0`.
fn twin_integrator() -> Scenario {
    Scenario {
        name: "twin-integrator".into(),
        assumptions: vec![
            "A = [[0,1],[0,0]] is marginally unstable; average tracking needs x_i(0) = r_i(0)"
                .into(),
        ],
        graph: Graph::path(4),
        a: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
        b: vec![vec![0.0], vec![1.0]],
        agents: vec![
            AgentSpec {
                r0: vec![1.0, 0.0],
                input: sinusoid(vec![1.0], 1.0, 0.0),
            },
            AgentSpec {
                r0: vec![-1.0, 0.5],
                input: sinusoid(vec![0.5], 2.0, 1.0),
            },
            AgentSpec {
                r0: vec![0.0, -0.5],
                input: InputDescriptor::Constant { value: vec![0.2] },
            },
            AgentSpec {
                r0: vec![2.0, 0.0],
                input: InputDescriptor::Zero { dim: 0 },
            },
        ],
        algorithm: Algorithm::Static,
        design: DesignSpec::default(),
        smoothing: BoundaryLayer { eps: 1.0, phi: 0.5 },
        adaptive: None,
        sim: SimConfig {
            t_end: 10.0,
            ..SimConfig::default()
        },
        analysis: AnalysisConfig::default(),
        numerics: NumericsConfig::default(),
        seed: None,
        random_initial: None,
    }
}

/// Eight damped oscillators with two inputs each, exercising every input kind.
fn ring_demo() -> Scenario {
    let table = InputDescriptor::Table {
        times: vec![0.0, 2.0, 4.0, 6.0],
        values: vec![
            vec![0.0, 0.5],
            vec![1.0, 0.0],
            vec![0.0, -1.0],
            vec![-0.5, 0.0],
        ],
    };
    let inputs = [
        sinusoid(vec![1.0, 0.0], 1.0, 0.0),
        sinusoid(vec![0.0, 1.0], 0.5, 0.3),
        InputDescriptor::Constant {
            value: vec![0.3, -0.2],
        },
        table,
        InputDescriptor::Zero { dim: 0 },
        sinusoid(vec![0.5, 0.5], 2.0, 0.0),
        InputDescriptor::Constant {
            value: vec![-0.4, 0.1],
        },
        sinusoid(vec![0.8, -0.3], 1.5, 1.0),
    ];
    Scenario {
        name: "ring-demo".into(),
        assumptions: vec![],
        graph: Graph::ring(8),
        a: vec![vec![-0.5, 1.0], vec![-1.0, -0.5]],
        b: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        agents: inputs
            .into_iter()
            .enumerate()
            .map(|(i, input)| {
                // evenly spaced on a circle of radius 2, rounded for readable configs
                let phase = i as f64 * std::f64::consts::PI / 4.0;
                let round = |v: f64| (v * 1e6).round() / 1e6;
                AgentSpec {
                    r0: vec![round(2.0 * phase.cos()), round(2.0 * phase.sin())],
                    input,
                }
            })
            .collect(),
        algorithm: Algorithm::Static,
        design: DesignSpec::default(),
        smoothing: BoundaryLayer { eps: 2.0, phi: 0.5 },
        adaptive: None,
        sim: SimConfig {
            t_end: 10.0,
            ..SimConfig::default()
        },
        analysis: AnalysisConfig::default(),
        numerics: NumericsConfig::default(),
        seed: None,
        random_initial: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_build() {
        for name in BUNDLED {
            let s = bundled(name).unwrap();
            assert_eq!(s.name, name);
            s.build::<f64>().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(bundled("nope").is_none());
    }

    #[test]
    fn json_round_trip() {
        for name in BUNDLED {
            let s = bundled(name).unwrap();
            let back = Scenario::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn sec5_adaptive_parameters() {
        let v: serde_json::Value =
            serde_json::from_str(&bundled("paper-sec5-adaptive").unwrap().to_json()).unwrap();
        assert_eq!(v["adaptive"]["mu"], 10.0);
        assert_eq!(v["adaptive"]["theta"], 0.01);
        assert_eq!(v["smoothing"]["eps"], 5.0);
        assert!(v["assumptions"]
            .as_array()
            .unwrap()
            .iter()
            .any(|a| a.as_str().unwrap().contains("ring C6")));
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value =
            serde_json::from_str(&bundled("ring-demo").unwrap().to_json()).unwrap();
        v["sim"]["dtt"] = 0.1.into();
        assert!(matches!(
            Scenario::from_json(&v.to_string()),
            Err(ScenarioError::Parse(_))
        ));
        let mut v: serde_json::Value =
            serde_json::from_str(&bundled("ring-demo").unwrap().to_json()).unwrap();
        v["colour"] = "red".into();
        assert!(Scenario::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn cross_dimension_errors() {
        let mut s = bundled("paper-sec5-static").unwrap();
        s.agents.pop();
        assert!(matches!(s.build::<f64>(), Err(ScenarioError::Invalid(_))));

        let mut s = bundled("paper-sec5-static").unwrap();
        s.agents[2].r0 = vec![1.0];
        assert!(matches!(s.build::<f64>(), Err(ScenarioError::Signal(_))));

        let mut s = bundled("paper-sec5-static").unwrap();
        s.design.q = Some(vec![vec![1.0]]);
        assert!(s.build::<f64>().is_err());

        let mut s = bundled("paper-sec5-adaptive").unwrap();
        s.adaptive.as_mut().unwrap().alpha0 = EdgeInit::PerEdge(vec![0.0; 5]);
        assert!(s.build::<f64>().is_err());

        let mut s = bundled("paper-sec5-adaptive").unwrap();
        s.adaptive = None;
        assert!(s.build::<f64>().is_err());
    }

    #[test]
    fn disconnected_graph_fails_at_step_two() {
        let mut s = bundled("paper-sec5-static").unwrap();
        s.graph = Graph::new(6, [(0, 1), (1, 2), (3, 4), (4, 5)]).unwrap();
        match s.build::<f64>() {
            Err(ScenarioError::Control(e)) => {
                assert_eq!(e.step(), Some(crate::control::DesignStep::FirstCoupling));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seeded_perturbation_is_deterministic() {
        let mut s = bundled("ring-demo").unwrap();
        let base = s.initial_states();
        s.random_initial = Some(RandomInitial { scale: 0.5 });
        s.seed = Some(7);
        let a = s.initial_states();
        assert_eq!(a, s.initial_states());
        assert_ne!(a, base);
        assert!(a
            .iter()
            .flatten()
            .zip(base.iter().flatten())
            .all(|(x, y)| (x - y).abs() <= 0.5));
        s.seed = Some(8);
        assert_ne!(a, s.initial_states());
    }

    #[test]
    fn builds_in_single_precision() {
        let mut s = bundled("paper-sec5-static").unwrap();
        s.numerics = NumericsConfig::single_precision();
        let b = s.build::<f32>().unwrap();
        assert!(matches!(b.problem.controller, Controller::Static(_)));
    }
}
