//! Reinforcement-learning control of an autonomous underwater vehicle.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod approx;
pub mod baselines;
pub mod config;
pub mod dpg;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod eval;
pub mod pg;
pub mod rng;
pub mod run;
pub mod tabular;

pub use error::{Error, Result};
