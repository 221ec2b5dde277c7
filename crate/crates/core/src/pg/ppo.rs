use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::policy::GaussianPolicy;
use crate::approx::{clip_global_norm, Activation, Adam, InitScheme, Mlp, Trace};
use crate::env::ContinuousEnv;
use crate::error::{Error, Result};
use crate::eval::{evaluate, CurveRow, EvalSummary};
use crate::rng::SeedStreams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    /// Clip range ε of the probability ratio.
    pub clip: f64,
    /// Weight λ₁ of the value loss.
    pub value_coef: f64,
    /// Weight λ₂ of the entropy bonus.
    pub entropy_coef: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub rollout_steps: usize,
    pub lr: f64,
    pub iterations: usize,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub init_log_std: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            gamma: 0.99,
            gae_lambda: 0.95,
            epochs: 10,
            minibatch: 64,
            rollout_steps: 2048,
            lr: 3e-4,
            iterations: 50,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            value_hidden: vec![64, 64],
            init_log_std: -0.5,
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::config("ppo.clip", "must lie in (0, 1)"));
        }
        if !(self.value_coef >= 0.0) {
            return Err(Error::config("ppo.value_coef", "must be >= 0"));
        }
        if !(self.entropy_coef >= 0.0) {
            return Err(Error::config("ppo.entropy_coef", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("ppo.gamma", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("ppo.gae_lambda", "must lie in [0, 1]"));
        }
        if self.minibatch == 0 || self.rollout_steps == 0 {
            return Err(Error::config("ppo.minibatch", "minibatch and rollout sizes must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config("ppo.lr", "must be > 0"));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(Error::config("ppo.max_grad_norm", "must be > 0"));
        }
        if self.hidden.contains(&0) || self.value_hidden.contains(&0) {
            return Err(Error::config("ppo.hidden", "hidden widths must be positive"));
        }
        if !self.init_log_std.is_finite() {
            return Err(Error::config("ppo.init_log_std", "must be finite"));
        }
        Ok(())
    }
}

/// Generalized advantage estimates and value targets.
///
/// `next_values[t]` is `V(s_{t+1})`, already zero when `s_{t+1}` is terminal; `ends[t]`
/// marks the last step of an episode segment (terminal or truncated), where the
/// recursion restarts.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    ends: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || next_values.len() != n || ends.len() != n {
        return Err(Error::domain("rollout sequences must have equal lengths"));
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        if ends[t] {
            running = 0.0;
        }
        let delta = rewards[t] + gamma * next_values[t] - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, targets))
}

/// `π_θ(z|s) / π_θold(z|s)` evaluated in log space.
pub fn ppo_ratio(policy: &GaussianPolicy, old_log_prob: f64, s: &[f64], z: &[f64]) -> Result<f64> {
    Ok((policy.log_prob(s, z)? - old_log_prob).exp())
}

/// Collected experience plus the quantities PPO needs per sample.
#[derive(Debug, Clone, Default)]
pub struct RolloutBatch {
    pub obs: Vec<Vec<f64>>,
    /// Pre-squash actions.
    pub z: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub ends: Vec<bool>,
    pub old_log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub next_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// Fills advantages and value targets; optionally normalizes the advantages to
    /// zero mean and unit variance (targets use the raw advantages).
    pub fn finish(&mut self, gamma: f64, lambda: f64, normalize: bool) -> Result<()> {
        let (adv, targets) = compute_gae(&self.rewards, &self.values, &self.next_values, &self.ends, gamma, lambda)?;
        self.value_targets = targets;
        self.advantages = if normalize { normalized(&adv) } else { adv };
        Ok(())
    }
}

pub fn normalized(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt() + 1e-8;
    x.iter().map(|v| (v - mean) / sd).collect()
}

/// Loss value `−(L^CLIP − λ₁·L^V + λ₂·H)` and its components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoLoss {
    pub loss: f64,
    pub clip: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Per-sample clipped surrogate `min(w·Â, clip(w, 1−ε, 1+ε)·Â)` and whether the
/// unclipped branch is the one selected (so gradient flows through `w`).
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> (f64, bool) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

/// PPO loss over the samples `idx` of `batch`, with gradients for the policy and the
/// value network when `grads` is given.
pub fn ppo_loss(
    policy: &GaussianPolicy,
    value_net: &Mlp,
    batch: &RolloutBatch,
    idx: &[usize],
    cfg: &PpoConfig,
    grads: Option<(&mut [f64], &mut [f64])>,
) -> Result<PpoLoss> {
    if idx.is_empty() {
        return Err(Error::domain("PPO loss needs at least one sample"));
    }
    let m = idx.len() as f64;
    let (mut clip_sum, mut value_sum) = (0.0, 0.0);
    let mut ptrace = Trace::default();
    let mut vtrace = Trace::default();
    let mut scratch = vec![0.0; policy.num_params()];
    let entropy = policy.entropy();
    let (mut gp, mut gv) = match grads {
        Some((gp, gv)) => (Some(gp), Some(gv)),
        None => (None, None),
    };
    for &i in idx {
        let (s, z, adv) = (&batch.obs[i], &batch.z[i], batch.advantages[i]);
        let lp = if gp.is_some() {
            scratch.iter_mut().for_each(|g| *g = 0.0);
            policy.accumulate_log_prob_gradient(s, z, 1.0, &mut ptrace, &mut scratch)?
        } else {
            policy.log_prob(s, z)?
        };
        let ratio = (lp - batch.old_log_probs[i]).exp();
        let (surr, flows) = clipped_surrogate(ratio, adv, cfg.clip);
        clip_sum += surr;
        if let Some(g) = gp.as_deref_mut() {
            if flows {
                // ∂(−w·Â/M)/∂θ = −(Â·w/M)·∇log π
                let k = -adv * ratio / m;
                for (gi, si) in g.iter_mut().zip(&scratch) {
                    *gi += k * si;
                }
            }
        }
        value_net.forward_trace(s, &mut vtrace)?;
        let diff = vtrace.output()[0] - batch.value_targets[i];
        value_sum += diff * diff;
        if let Some(g) = gv.as_deref_mut() {
            value_net.backward_trace(&vtrace, &[2.0 * cfg.value_coef * diff / m], 1.0, g, false)?;
        }
    }
    if let Some(g) = gp {
        let n = policy.mean_net().num_params();
        for gi in &mut g[n..] {
            *gi -= cfg.entropy_coef;
        }
    }
    let clip = clip_sum / m;
    let value = value_sum / m;
    Ok(PpoLoss {
        loss: -(clip - cfg.value_coef * value + cfg.entropy_coef * entropy),
        clip,
        value,
        entropy,
    })
}

pub fn value_network(obs_width: usize, hidden: &[usize], seed: u64) -> Result<Mlp> {
    let mut widths = vec![obs_width];
    widths.extend_from_slice(hidden);
    widths.push(1);
    let mut acts = vec![Activation::Tanh; hidden.len()];
    acts.push(Activation::Linear);
    Mlp::init(&widths, &acts, seed, InitScheme::ScaledUniform)
}

#[derive(Debug, Clone)]
pub struct PpoRun {
    pub initial_policy: GaussianPolicy,
    pub initial_value: Mlp,
    pub policy: GaussianPolicy,
    pub value: Mlp,
    pub curve: Vec<CurveRow>,
    pub env_steps: usize,
}

fn abort(episode: usize, step: usize, detail: String) -> Error {
    Error::NumericAbort {
        episode,
        step,
        detail,
    }
}

/// Freshly initialized policy and value networks from the `init` stream.
pub fn ppo_networks<E: ContinuousEnv + ?Sized>(
    env: &E,
    cfg: &PpoConfig,
    seeds: &SeedStreams,
) -> Result<(GaussianPolicy, Mlp)> {
    let policy = GaussianPolicy::init(
        env.observation_width(),
        &cfg.hidden,
        &env.action_limits(),
        cfg.init_log_std,
        seeds.child_seed("init", 0),
    )?;
    let value = value_network(env.observation_width(), &cfg.value_hidden, seeds.child_seed("init", 1))?;
    Ok((policy, value))
}

/// Proximal policy optimization: fixed-length rollouts (episodes continue across
/// iterations), GAE, then `epochs` passes of shuffled minibatch updates.
pub fn train_ppo<E: ContinuousEnv + ?Sized>(env: &mut E, cfg: &PpoConfig, seeds: &SeedStreams) -> Result<PpoRun> {
    train_ppo_with_hook(env, cfg, seeds, &mut |_, _| Ok(()))
}

/// [`train_ppo`] with `hook(episode, policy)` called after every finished episode.
pub fn train_ppo_with_hook<E: ContinuousEnv + ?Sized>(
    env: &mut E,
    cfg: &PpoConfig,
    seeds: &SeedStreams,
    hook: &mut dyn FnMut(usize, &GaussianPolicy) -> Result<()>,
) -> Result<PpoRun> {
    cfg.validate()?;
    let (mut policy, mut value) = ppo_networks(env, cfg, seeds)?;
    let (initial_policy, initial_value) = (policy.clone(), value.clone());
    let mut popt = Adam::new(policy.num_params(), cfg.lr);
    let mut vopt = Adam::new(value.num_params(), cfg.lr);
    let mut env_rng = seeds.stream("env");
    let mut act_rng = seeds.stream("exploration");
    let mut shuffle_rng = seeds.stream("sampling");

    let mut curve = Vec::new();
    let mut env_steps = 0;
    let mut obs: Option<Vec<f64>> = None;
    let (mut ep_ret, mut ep_err, mut ep_steps) = (0.0, 0.0, 0usize);

    for _ in 0..cfg.iterations {
        let mut batch = RolloutBatch::default();
        while batch.len() < cfg.rollout_steps {
            let s = match obs.take() {
                Some(s) => s,
                None => env.reset(&mut env_rng),
            };
            let z = policy.sample(&s, &mut act_rng)?;
            let lp = policy.log_prob(&s, &z)?;
            let v = value.forward(&s)?[0];
            let step = env.step(&policy.squash(&z)).map_err(|e| {
                abort(curve.len(), ep_steps, format!("environment step failed: {e}; obs {s:?}, z {z:?}"))
            })?;
            env_steps += 1;
            ep_steps += 1;
            ep_ret += step.reward;
            ep_err += env.tracking_error();
            if !step.reward.is_finite() || !lp.is_finite() || !v.is_finite() {
                return Err(abort(
                    curve.len(),
                    ep_steps,
                    format!("non-finite rollout values: reward {}, log prob {lp}, value {v}", step.reward),
                ));
            }
            let end = step.done || ep_steps >= env.max_steps();
            let next_value = if step.terminal { 0.0 } else { value.forward(&step.obs)?[0] };
            batch.obs.push(s);
            batch.z.push(z);
            batch.rewards.push(step.reward);
            batch.ends.push(end);
            batch.old_log_probs.push(lp);
            batch.values.push(v);
            batch.next_values.push(next_value);
            if end {
                curve.push(CurveRow {
                    episode: curve.len(),
                    ret: ep_ret,
                    tracking_error: ep_err / ep_steps as f64,
                    steps: ep_steps,
                });
                (ep_ret, ep_err, ep_steps) = (0.0, 0.0, 0);
                hook(curve.len() - 1, &policy)?;
            } else {
                obs = Some(step.obs);
            }
        }
        // the final segment is cut here; its bootstrap value is already in next_values
        if let Some(last) = batch.ends.last_mut() {
            *last = true;
        }
        batch.finish(cfg.gamma, cfg.gae_lambda, cfg.normalize_advantages)?;

        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut gp = vec![0.0; policy.num_params()];
        let mut gv = vec![0.0; value.num_params()];
        for _ in 0..cfg.epochs {
            order.shuffle(&mut shuffle_rng);
            for idx in order.chunks(cfg.minibatch) {
                gp.iter_mut().for_each(|g| *g = 0.0);
                gv.iter_mut().for_each(|g| *g = 0.0);
                let loss = ppo_loss(&policy, &value, &batch, idx, cfg, Some((&mut gp, &mut gv)))?;
                if !loss.loss.is_finite() || gp.iter().chain(&gv).any(|g| !g.is_finite()) {
                    return Err(abort(
                        curve.len(),
                        ep_steps,
                        format!("non-finite PPO loss {loss:?}"),
                    ));
                }
                clip_global_norm(&mut gp, cfg.max_grad_norm);
                clip_global_norm(&mut gv, cfg.max_grad_norm);
                let mut params = policy.params();
                popt.step(&mut params, &gp);
                policy.set_params(&params)?;
                vopt.step(value.params_mut(), &gv);
            }
        }
    }
    Ok(PpoRun {
        initial_policy,
        initial_value,
        policy,
        value,
        curve,
        env_steps,
    })
}

/// Deterministic rollouts of `limit ⊙ tanh(mean(s))`; episode `i` uses the `eval`
/// stream with index `i`.
pub fn evaluate_policy<E: ContinuousEnv + ?Sized>(
    policy: &GaussianPolicy,
    env: &mut E,
    episodes: usize,
    seeds: &SeedStreams,
) -> Result<EvalSummary> {
    let mut greedy = |obs: &[f64]| policy.greedy_action(obs);
    evaluate(env, &mut greedy, episodes, |i| seeds.indexed("eval", i))
}
