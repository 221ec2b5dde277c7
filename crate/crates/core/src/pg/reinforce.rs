use serde::{Deserialize, Serialize};

use super::policy::GaussianPolicy;
use crate::approx::{clip_global_norm, Adam, Trace};
use crate::env::ContinuousEnv;
use crate::error::{Error, Result};
use crate::eval::CurveRow;
use crate::rng::SeedStreams;

/// One step of a sampled episode: state, pre-squash action, reward.
#[derive(Debug, Clone, PartialEq)]
pub struct PgStep {
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub r: f64,
}

/// Discounted reward-to-go `G_t = Σ_k γ^k r_{t+k}` of one episode.
pub fn rewards_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut g = vec![0.0; rewards.len()];
    let mut running = 0.0;
    for t in (0..rewards.len()).rev() {
        running = rewards[t] + gamma * running;
        g[t] = running;
    }
    g
}

/// Score-function estimate: mean over all steps of `∇_θ log π_θ(z_t|s_t) · G_t`.
pub fn reinforce_gradient(policy: &GaussianPolicy, trajectories: &[Vec<PgStep>], gamma: f64) -> Result<Vec<f64>> {
    let total: usize = trajectories.iter().map(Vec::len).sum();
    let mut grad = vec![0.0; policy.num_params()];
    if total == 0 {
        return Ok(grad);
    }
    let mut trace = Trace::default();
    for traj in trajectories {
        let rewards: Vec<f64> = traj.iter().map(|s| s.r).collect();
        let g = rewards_to_go(&rewards, gamma);
        for (step, g) in traj.iter().zip(g) {
            if g != 0.0 {
                policy.accumulate_log_prob_gradient(&step.s, &step.z, g / total as f64, &mut trace, &mut grad)?;
            }
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReinforceConfig {
    pub episodes: usize,
    /// Episodes per gradient step.
    pub batch_episodes: usize,
    pub gamma: f64,
    pub lr: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        Self {
            episodes: 200,
            batch_episodes: 10,
            gamma: 0.99,
            lr: 1e-3,
            max_grad_norm: 1.0,
            hidden: vec![64, 64],
            init_log_std: -0.5,
        }
    }
}

impl ReinforceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_episodes == 0 {
            return Err(Error::config("reinforce.batch_episodes", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("reinforce.gamma", "must lie in [0, 1]"));
        }
        if !(self.lr > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err(Error::config("reinforce.lr", "learning rate and gradient bound must be > 0"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("reinforce.hidden", "hidden widths must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReinforceRun {
    pub initial_policy: GaussianPolicy,
    pub policy: GaussianPolicy,
    pub curve: Vec<CurveRow>,
    pub env_steps: usize,
}

pub fn reinforce_policy<E: ContinuousEnv + ?Sized>(
    env: &E,
    cfg: &ReinforceConfig,
    seeds: &SeedStreams,
) -> Result<GaussianPolicy> {
    GaussianPolicy::init(
        env.observation_width(),
        &cfg.hidden,
        &env.action_limits(),
        cfg.init_log_std,
        seeds.child_seed("init", 0),
    )
}

/// Monte Carlo policy gradient with Adam ascent every `batch_episodes` episodes.
pub fn train_reinforce<E: ContinuousEnv + ?Sized>(
    env: &mut E,
    cfg: &ReinforceConfig,
    seeds: &SeedStreams,
) -> Result<ReinforceRun> {
    cfg.validate()?;
    let mut policy = reinforce_policy(env, cfg, seeds)?;
    let initial_policy = policy.clone();
    let mut opt = Adam::new(policy.num_params(), cfg.lr);
    let mut env_rng = seeds.stream("env");
    let mut act_rng = seeds.stream("exploration");
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut pending = Vec::new();
    let mut env_steps = 0;
    for episode in 0..cfg.episodes {
        let mut s = env.reset(&mut env_rng);
        let mut traj = Vec::new();
        let (mut ret, mut err) = (0.0, 0.0);
        while traj.len() < env.max_steps() {
            let z = policy.sample(&s, &mut act_rng)?;
            let step = env.step(&policy.squash(&z)).map_err(|e| Error::NumericAbort {
                episode,
                step: traj.len(),
                detail: format!("environment step failed: {e}"),
            })?;
            env_steps += 1;
            ret += step.reward;
            err += env.tracking_error();
            let done = step.done;
            traj.push(PgStep {
                s: std::mem::replace(&mut s, step.obs),
                z,
                r: step.reward,
            });
            if done {
                break;
            }
        }
        curve.push(CurveRow {
            episode,
            ret,
            tracking_error: err / traj.len().max(1) as f64,
            steps: traj.len(),
        });
        pending.push(traj);
        if pending.len() == cfg.batch_episodes || episode + 1 == cfg.episodes {
            let mut grad = reinforce_gradient(&policy, &pending, cfg.gamma)?;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NumericAbort {
                    episode,
                    step: 0,
                    detail: "non-finite policy gradient".into(),
                });
            }
            clip_global_norm(&mut grad, cfg.max_grad_norm);
            grad.iter_mut().for_each(|g| *g = -*g);
            let mut params = policy.params();
            opt.step(&mut params, &grad);
            policy.set_params(&params)?;
            pending.clear();
        }
    }
    Ok(ReinforceRun {
        initial_policy,
        policy,
        curve,
        env_steps,
    })
}
