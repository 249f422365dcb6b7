//! Seeded Flock and Pedestrian simulators with scheduled emergent phases.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with the
//! config's 64-bit seed, so traces are bit-identical across platforms for a
//! given (config, seed).

mod config;
mod flock;
mod objective;
mod pedestrian;

pub use config::{default_schedule, FlockRules, PedestrianRules, SimConfig};
pub use flock::simulate_flock;
pub use objective::{empty_patches, lane_count, objective_measure};
pub use pedestrian::simulate_pedestrian;

use crate::dyngraph::{AgentTrace, Dataset};
use crate::error::Result;

/// Runs the simulator selected by `config.dataset`.
pub fn simulate(config: &SimConfig) -> Result<AgentTrace> {
    config.validate()?;
    Ok(match config.dataset {
        Dataset::Flock => simulate_flock(config),
        Dataset::Pedestrian => simulate_pedestrian(config),
    })
}

/// Collects recorded steps and the raw-resolution objective measure while a
/// simulator runs.
pub(crate) struct Recorder {
    record_stride: usize,
    objective_stride: usize,
    pub steps: Vec<Vec<crate::dyngraph::State>>,
    pub objective: Vec<f64>,
}

impl Recorder {
    pub fn new(config: &SimConfig) -> Self {
        Recorder {
            record_stride: config.record_stride,
            objective_stride: config.objective_stride,
            steps: Vec::with_capacity(config.n_steps.div_ceil(config.record_stride)),
            objective: Vec::with_capacity(config.n_steps.div_ceil(config.objective_stride)),
        }
    }

    pub fn observe(&mut self, t: usize, states: &[crate::dyngraph::State], measure: impl FnOnce() -> f64) {
        if t % self.record_stride == 0 {
            self.steps.push(states.to_vec());
        }
        if t % self.objective_stride == 0 {
            self.objective.push(measure());
        }
    }
}
