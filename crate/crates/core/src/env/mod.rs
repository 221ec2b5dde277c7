//! Control tasks built on the vehicle models, plus a discrete grid-world.

pub mod grid;
pub mod pipe;
pub mod seafloor;
pub mod terrain;

pub use grid::{GridAction, GridConfig, GridWorld};
pub use pipe::{pipe_features, pipe_reward, PipeConfig, PipeEnv, PipeFeatures, PipeGeometry, PipeObservation};
pub use seafloor::{
    seafloor_reward, SeafloorConfig, SeafloorEnv, SeafloorObservation, SeafloorRewardWeights,
};
pub use terrain::{terrain_generate, TerrainConfig, TerrainKind, TerrainProfile};

use crate::error::Result;
use crate::rng::SimRng;

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// The episode is over; the next call must be `reset`.
    pub done: bool,
    /// The episode ended in a true terminal state, so no value should be bootstrapped
    /// past it. Time limits and soft abort bounds end episodes without being terminal.
    pub terminal: bool,
}

/// A continuous-action episodic task with a flat observation vector.
pub trait ContinuousEnv {
    fn observation_width(&self) -> usize;

    /// Per-component bound of the action vector (thrust limits, N).
    fn action_limits(&self) -> Vec<f64>;

    /// Starts a new episode; `rng` drives any randomized initial conditions.
    fn reset(&mut self, rng: &mut SimRng) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<Step>;

    /// Nominal episode length in control steps.
    fn max_steps(&self) -> usize;

    /// Task error after the latest step: |Δz| for depth tracking, d_c/d_max for pipes.
    fn tracking_error(&self) -> f64;

    /// Column name used for the per-episode mean of [`ContinuousEnv::tracking_error`].
    fn tracking_label(&self) -> &'static str {
        "mean_tracking_error"
    }

    /// Whether the tracked target is currently observable.
    fn target_visible(&self) -> bool {
        true
    }

    /// Column names of [`ContinuousEnv::trajectory_row`].
    fn trajectory_header(&self) -> &'static [&'static str];

    /// Record describing the latest transition.
    fn trajectory_row(&self) -> Vec<f64>;
}
