//! Distributed average tracking of linear reference signals.
//!
//! `N` agents on an undirected connected graph each observe one reference
//! `ṙ_i = A r_i + B f_i(t)` and exchange only relative states with their
//! neighbors. The continuous edge-based law (static or with adaptive
//! per-edge gains) drives every agent to the average `(1/N) Σ r_i(t)`.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases fix the common double-precision case.
//!
//! ```
//! use avgtrack::scenario::bundled;
//! use avgtrack::sim::{run, SimConfig};
//!
//! let scenario = bundled("paper-sec5-static").unwrap();
//! let built = scenario.build::<f64>().unwrap();
//! let cfg = SimConfig { t_end: 1.0, ..built.sim };
//! let traj = run(&built.problem, &cfg).unwrap();
//! assert_eq!(traj.times.len(), 101);
//! ```
// dense kernels index several arrays in lockstep
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod control;
pub mod graph;
pub mod matrix;
pub mod numerics;
pub mod scalar;
pub mod scenario;
pub mod signals;
pub mod sim;

use thiserror::Error;

pub use scalar::Scalar;

pub type Matrix64 = matrix::Matrix<f64>;
pub type Matrix32 = matrix::Matrix<f32>;
pub type LinearPlant64 = signals::LinearPlant<f64>;
pub type ReferenceSet64 = signals::ReferenceSet<f64>;
pub type StaticGains64 = control::StaticGains<f64>;
pub type AdaptiveParams64 = control::AdaptiveParams<f64>;
pub type NetworkState64 = control::NetworkState<f64>;
pub type Problem64 = sim::Problem<f64>;
pub type Trajectory64 = sim::Trajectory<f64>;
pub type TheoremConstants64 = analysis::TheoremConstants<f64>;

/// Any error raised by this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Signal(#[from] signals::SignalError),
    #[error(transparent)]
    Control(#[from] control::ControlError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
}

impl Error {
    /// `true` for failures caused by the input configuration rather than by
    /// the numerics of a valid one.
    pub fn is_config_error(&self) -> bool {
        match self {
            Self::Graph(_) | Self::Signal(_) | Self::Control(_) => true,
            Self::Scenario(e) => !matches!(
                e,
                scenario::ScenarioError::Sim(sim::SimError::NonFinite { .. })
            ),
            Self::Sim(e) => matches!(
                e,
                sim::SimError::InvalidConfig(_) | sim::SimError::Control(_)
            ),
            Self::Numerics(_) | Self::Analysis(_) => false,
        }
    }
}
