//! Deterministic-policy-gradient actor-critic with prioritized experience replay.

mod agent;
mod per;
mod train;

pub use agent::{DpgAgent, DpgCheckpoint, DpgConfig};
pub use per::{PrioritizedBuffer, PrioritizedSample, SumTree, Transition};
pub use train::{dpg_agent_for, evaluate_dpg, train_dpg, train_dpg_with_hook, DpgRun};
