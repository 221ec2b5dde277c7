//! Stochastic policy-gradient methods: REINFORCE and PPO with a clipped surrogate.

mod policy;
mod ppo;
mod reinforce;

pub use policy::{GaussianPolicy, PolicyDocument};
pub use ppo::{
    clipped_surrogate, compute_gae, evaluate_policy, normalized, ppo_loss, ppo_networks, ppo_ratio, train_ppo, train_ppo_with_hook,
    value_network, PpoConfig, PpoLoss, PpoRun, RolloutBatch,
};
pub use reinforce::{
    reinforce_gradient, reinforce_policy, rewards_to_go, train_reinforce, PgStep, ReinforceConfig, ReinforceRun,
};
