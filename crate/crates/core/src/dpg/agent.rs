use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::per::Transition;
use crate::approx::{Activation, Adam, InitScheme, Mlp, MlpDocument, Trace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpgConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub gamma: f64,
    /// Soft target-update rate τ.
    pub tau: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Exploration noise standard deviation as a fraction of each thrust limit.
    pub explore_sigma: f64,
    /// Multiplier applied to environment rewards before they enter the critic targets.
    pub reward_scale: f64,
    /// Lower bound on replay priorities.
    pub priority_floor: f64,
    pub replay_capacity: usize,
    /// Priority exponent α.
    pub per_alpha: f64,
    /// Importance-sampling exponent β, annealed linearly from start to end over the
    /// step budget.
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    /// Environment steps collected before updates begin.
    pub warmup_steps: usize,
    pub episodes: usize,
    /// Upper bound on environment steps; 0 means `episodes × max_steps`.
    pub max_env_steps: usize,
}

impl Default for DpgConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64, 32],
            gamma: 0.99,
            tau: 0.005,
            batch_size: 64,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            explore_sigma: 0.2,
            reward_scale: 1.0,
            priority_floor: 1e-3,
            replay_capacity: 100_000,
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            warmup_steps: 1000,
            episodes: 100,
            max_env_steps: 0,
        }
    }
}

impl DpgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return Err(Error::config("dpg.actor_hidden", "hidden widths must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("dpg.gamma", "must lie in [0, 1]"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config("dpg.tau", "must lie in (0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("dpg.batch_size", "must be positive"));
        }
        if !(self.actor_lr > 0.0) || !(self.critic_lr > 0.0) {
            return Err(Error::config("dpg.actor_lr", "learning rates must be > 0"));
        }
        if !(self.explore_sigma >= 0.0) {
            return Err(Error::config("dpg.explore_sigma", "must be >= 0"));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::config("dpg.reward_scale", "must be > 0"));
        }
        if !(self.priority_floor > 0.0) {
            return Err(Error::config("dpg.priority_floor", "must be > 0"));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::config("dpg.replay_capacity", "must hold at least one batch"));
        }
        if !(self.per_alpha >= 0.0) {
            return Err(Error::config("dpg.per_alpha", "must be >= 0"));
        }
        if !(self.per_beta_start >= 0.0 && self.per_beta_end >= 0.0) {
            return Err(Error::config("dpg.per_beta_start", "must be >= 0"));
        }
        Ok(())
    }
}

/// Deterministic actor `μ_θ(s) = limit ⊙ tanh(·)` with a critic `Q_ω(s, u)` and
/// slowly tracking target copies of both.
///
/// The critic sees actions divided by the thrust limits, so its action inputs lie in
/// `[-1, 1]` like the actor's pre-scaling output.
#[derive(Debug, Clone)]
pub struct DpgAgent {
    pub cfg: DpgConfig,
    limits: Vec<f64>,
    actor: Mlp,
    critic: Mlp,
    actor_target: Mlp,
    critic_target: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    scratch: Scratch,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    actor: Trace,
    critic: Trace,
    input: Vec<f64>,
    grad: Vec<f64>,
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

impl DpgAgent {
    pub fn new(obs_width: usize, limits: &[f64], cfg: DpgConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if limits.is_empty() || limits.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::domain("thrust limits must be positive"));
        }
        let n_act = limits.len();
        let aw = widths(obs_width, &cfg.actor_hidden, n_act);
        let mut aa = vec![Activation::Relu; cfg.actor_hidden.len()];
        aa.push(Activation::Tanh);
        let cw = widths(obs_width + n_act, &cfg.critic_hidden, 1);
        let mut ca = vec![Activation::Relu; cfg.critic_hidden.len()];
        ca.push(Activation::Linear);
        let actor = Mlp::init(&aw, &aa, seed, InitScheme::ScaledUniform)?;
        let critic = Mlp::init(&cw, &ca, seed ^ 0x9e37_79b9_7f4a_7c15, InitScheme::ScaledUniform)?;
        Self::from_networks(actor, critic, limits, cfg)
    }

    pub fn from_networks(actor: Mlp, critic: Mlp, limits: &[f64], cfg: DpgConfig) -> Result<Self> {
        cfg.validate()?;
        if actor.output_width() != limits.len() {
            return Err(Error::domain(format!(
                "actor outputs {} actions but {} thrust limits were given",
                actor.output_width(),
                limits.len()
            )));
        }
        if critic.input_width() != actor.input_width() + limits.len() || critic.output_width() != 1 {
            return Err(Error::domain(format!(
                "critic shape {:?} does not fit actor shape {:?}",
                critic.widths(),
                actor.widths()
            )));
        }
        Ok(Self {
            actor_opt: Adam::new(actor.num_params(), cfg.actor_lr),
            critic_opt: Adam::new(critic.num_params(), cfg.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            limits: limits.to_vec(),
            actor,
            critic,
            cfg,
            scratch: Scratch::default(),
        })
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn actor_target(&self) -> &Mlp {
        &self.actor_target
    }

    pub fn critic_target(&self) -> &Mlp {
        &self.critic_target
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critic_mut(&mut self) -> &mut Mlp {
        &mut self.critic
    }

    /// Copies the main networks into the targets.
    pub fn sync_targets(&mut self) {
        self.actor_target = self.actor.clone();
        self.critic_target = self.critic.clone();
    }

    pub fn limits(&self) -> &[f64] {
        &self.limits
    }

    pub fn obs_width(&self) -> usize {
        self.actor.input_width()
    }

    /// Deterministic action `μ_θ(obs)` in Newtons.
    pub fn policy(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let y = self.actor.forward(obs)?;
        Ok(y.iter().zip(&self.limits).map(|(y, l)| y * l).collect())
    }

    /// `μ_θ(obs)`, plus Gaussian noise of standard deviation `σ·limit` when exploring,
    /// clamped to the thrust limits.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], explore: bool, rng: &mut R) -> Result<Vec<f64>> {
        let mut u = self.policy(obs)?;
        if explore && self.cfg.explore_sigma > 0.0 {
            for (a, l) in u.iter_mut().zip(&self.limits) {
                let n: f64 = rng.sample(StandardNormal);
                *a = (*a + n * self.cfg.explore_sigma * l).clamp(-l, *l);
            }
        }
        Ok(u)
    }

    fn critic_input(&self, s: &[f64], u: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(s);
        out.extend(u.iter().zip(&self.limits).map(|(a, l)| a / l));
    }

    pub fn q_value(&self, s: &[f64], u: &[f64]) -> Result<f64> {
        let mut x = Vec::new();
        self.check_action(u)?;
        self.critic_input(s, u, &mut x);
        Ok(self.critic.forward(&x)?[0])
    }

    fn check_action(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.limits.len() {
            return Err(Error::domain(format!(
                "action has width {}, agent expects {}",
                u.len(),
                self.limits.len()
            )));
        }
        Ok(())
    }

    /// Bootstrapped target `scale·r + γ·Q'(s', μ'(s'))`, without the bootstrap term for
    /// terminal transitions.
    pub fn td_target(&self, t: &Transition) -> Result<f64> {
        let mut y = self.cfg.reward_scale * t.r;
        if !t.done && self.cfg.gamma > 0.0 {
            let a = self.actor_target.forward(&t.s_next)?;
            let mut x = Vec::with_capacity(t.s_next.len() + a.len());
            x.extend_from_slice(&t.s_next);
            x.extend_from_slice(&a);
            y += self.cfg.gamma * self.critic_target.forward(&x)?[0];
        }
        Ok(y)
    }

    pub fn td_error(&self, t: &Transition) -> Result<f64> {
        Ok(self.td_target(t)? - self.q_value(&t.s, &t.u)?)
    }

    /// Replay priority `max(|δ|, floor)` with target networks in the bootstrap term.
    pub fn priority(&self, t: &Transition) -> Result<f64> {
        Ok(self.td_error(t)?.abs().max(self.cfg.priority_floor))
    }

    /// Gradient of the weighted loss `(1/M) Σ wᵢ (Q(sᵢ,uᵢ) − yᵢ)²` with respect to the
    /// critic parameters, plus the loss and per-sample |δ|.
    pub fn critic_gradient(&mut self, batch: &[Transition], weights: &[f64]) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::domain("critic update needs a nonempty batch"));
        }
        if weights.len() != batch.len() {
            return Err(Error::domain("one importance weight per sample is required"));
        }
        let m = batch.len() as f64;
        let mut grad = vec![0.0; self.critic.num_params()];
        let mut td = Vec::with_capacity(batch.len());
        let mut loss = 0.0;
        let mut scratch = std::mem::take(&mut self.scratch);
        for (t, &w) in batch.iter().zip(weights) {
            self.check_action(&t.u)?;
            let y = self.td_target(t)?;
            self.critic_input(&t.s, &t.u, &mut scratch.input);
            self.critic.forward_trace(&scratch.input, &mut scratch.critic)?;
            let delta = scratch.critic.output()[0] - y;
            loss += w * delta * delta / m;
            td.push(delta.abs());
            if w != 0.0 {
                self.critic
                    .backward_trace(&scratch.critic, &[2.0 * w * delta / m], 1.0, &mut grad, false)?;
            }
        }
        self.scratch = scratch;
        Ok((grad, loss, td))
    }

    /// One optimizer step on the weighted TD loss. Returns the loss before the step and
    /// per-sample |TD error|.
    pub fn critic_update(&mut self, batch: &[Transition], weights: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (grad, loss, td) = self.critic_gradient(batch, weights)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::domain(format!("critic loss is not finite ({loss})")));
        }
        self.critic_opt.step(self.critic.params_mut(), &grad);
        Ok((loss, td))
    }

    /// Sampled deterministic policy gradient `(1/M) Σ ∇_θ μ_θ(sᵢ) ∇_u Q(sᵢ, u)|_{u=μ_θ(sᵢ)}`
    /// (ascent direction).
    pub fn actor_gradient(&mut self, states: &[&[f64]]) -> Result<Vec<f64>> {
        if states.is_empty() {
            return Err(Error::domain("actor update needs a nonempty batch"));
        }
        let m = states.len() as f64;
        let n_obs = self.actor.input_width();
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.grad.clear();
        scratch.grad.resize(self.actor.num_params(), 0.0);
        for s in states {
            self.actor.forward_trace(s, &mut scratch.actor)?;
            scratch.input.clear();
            scratch.input.extend_from_slice(s);
            scratch.input.extend_from_slice(scratch.actor.output());
            self.critic.forward_trace(&scratch.input, &mut scratch.critic)?;
            let dq = self.critic.input_gradient(&scratch.critic, &[1.0])?;
            self.actor
                .backward_trace(&scratch.actor, &dq[n_obs..], 1.0 / m, &mut scratch.grad, false)?;
        }
        let grad = scratch.grad.clone();
        self.scratch = scratch;
        Ok(grad)
    }

    /// Ascends the sampled deterministic policy gradient. Returns its norm.
    pub fn actor_update(&mut self, batch: &[Transition]) -> Result<f64> {
        let states: Vec<&[f64]> = batch.iter().map(|t| t.s.as_slice()).collect();
        let mut grad = self.actor_gradient(&states)?;
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::domain("actor gradient is not finite"));
        }
        grad.iter_mut().for_each(|g| *g = -*g);
        self.actor_opt.step(self.actor.params_mut(), &grad);
        Ok(norm)
    }

    /// `target ← (1 − τ)·target + τ·main` for both networks.
    pub fn soft_update(&mut self) {
        let tau = self.cfg.tau;
        for (t, m) in self.actor_target.params_mut().iter_mut().zip(self.actor.params()) {
            *t = (1.0 - tau) * *t + tau * m;
        }
        for (t, m) in self.critic_target.params_mut().iter_mut().zip(self.critic.params()) {
            *t = (1.0 - tau) * *t + tau * m;
        }
    }

    pub fn to_checkpoint(&self) -> DpgCheckpoint {
        DpgCheckpoint {
            limits: self.limits.clone(),
            cfg: self.cfg.clone(),
            actor: self.actor.to_document(),
            critic: self.critic.to_document(),
        }
    }

    pub fn from_checkpoint(c: &DpgCheckpoint) -> Result<Self> {
        Self::from_networks(
            Mlp::from_document(&c.actor)?,
            Mlp::from_document(&c.critic)?,
            &c.limits,
            c.cfg.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpgCheckpoint {
    pub limits: Vec<f64>,
    pub cfg: DpgConfig,
    pub actor: MlpDocument,
    pub critic: MlpDocument,
}
