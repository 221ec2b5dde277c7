use super::agent::{DpgAgent, DpgConfig};
use super::per::{PrioritizedBuffer, Transition};
use crate::env::ContinuousEnv;
use crate::error::{Error, Result};
use crate::eval::{evaluate, CurveRow, EvalSummary};
use crate::rng::SeedStreams;

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct DpgRun {
    pub initial: DpgAgent,
    pub agent: DpgAgent,
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

/// Fresh agent for `env`, initialized from the `init` stream of `seeds`.
pub fn dpg_agent_for<E: ContinuousEnv + ?Sized>(env: &E, cfg: &DpgConfig, seeds: &SeedStreams) -> Result<DpgAgent> {
    DpgAgent::new(
        env.observation_width(),
        &env.action_limits(),
        cfg.clone(),
        seeds.child_seed("init", 0),
    )
}

/// Trains a DPG agent with prioritized replay.
///
/// Every step acts with exploration noise, stores the transition at maximum priority,
/// then (after warm-up) samples a batch, updates the critic, refreshes the sampled
/// priorities with the returned TD errors, updates the actor and soft-updates the
/// targets. `prefill` transitions are stored before the first episode.
pub fn train_dpg<E: ContinuousEnv + ?Sized>(
    env: &mut E,
    cfg: &DpgConfig,
    seeds: &SeedStreams,
    prefill: &[Transition],
) -> Result<DpgRun> {
    train_dpg_with_hook(env, cfg, seeds, prefill, &mut |_, _| Ok(()))
}

/// [`train_dpg`] with `hook(episode, agent)` called after every finished episode.
pub fn train_dpg_with_hook<E: ContinuousEnv + ?Sized>(
    env: &mut E,
    cfg: &DpgConfig,
    seeds: &SeedStreams,
    prefill: &[Transition],
    hook: &mut dyn FnMut(usize, &DpgAgent) -> Result<()>,
) -> Result<DpgRun> {
    cfg.validate()?;
    let mut agent = dpg_agent_for(env, cfg, seeds)?;
    let initial = agent.clone();
    let mut buffer = PrioritizedBuffer::new(cfg.replay_capacity, cfg.per_alpha, cfg.priority_floor)?;
    for t in prefill {
        if t.s.len() != env.observation_width() || t.u.len() != env.action_limits().len() {
            return Err(Error::domain("prefill transition widths do not match the environment"));
        }
        buffer.push(t.clone());
    }
    let mut env_rng = seeds.stream("env");
    let mut explore_rng = seeds.stream("exploration");
    let mut sample_rng = seeds.stream("sampling");

    let budget = if cfg.max_env_steps > 0 {
        cfg.max_env_steps
    } else {
        cfg.episodes * env.max_steps()
    };
    let warmup = cfg.warmup_steps.max(cfg.batch_size);
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut env_steps = 0usize;

    for episode in 0..cfg.episodes {
        if env_steps >= budget {
            break;
        }
        let mut obs = env.reset(&mut env_rng);
        let (mut ret, mut err, mut steps) = (0.0, 0.0, 0usize);
        while steps < env.max_steps() && env_steps < budget {
            let u = agent.act(&obs, true, &mut explore_rng)?;
            let step = env.step(&u).map_err(|e| {
                abort(episode, steps, format!("environment step failed: {e}; obs {obs:?}, action {u:?}"))
            })?;
            steps += 1;
            env_steps += 1;
            ret += step.reward;
            err += env.tracking_error();
            if !step.reward.is_finite() || step.obs.iter().any(|v| !v.is_finite()) {
                return Err(abort(
                    episode,
                    steps,
                    format!("non-finite transition: obs {:?}, reward {}", step.obs, step.reward),
                ));
            }
            buffer.push(Transition {
                s: std::mem::take(&mut obs),
                u,
                r: step.reward,
                s_next: step.obs.clone(),
                done: step.terminal,
            });
            obs = step.obs;

            if buffer.len() >= warmup {
                let progress = (env_steps as f64 / budget.max(1) as f64).min(1.0);
                let beta = cfg.per_beta_start + (cfg.per_beta_end - cfg.per_beta_start) * progress;
                let sample = buffer.sample(cfg.batch_size, beta, &mut sample_rng)?;
                let (loss, td) = agent
                    .critic_update(&sample.batch, &sample.weights)
                    .map_err(|e| abort(episode, steps, format!("critic update: {e}; obs {obs:?}")))?;
                buffer
                    .update_priorities(&sample.indices, &td)
                    .map_err(|e| abort(episode, steps, format!("priority refresh after loss {loss}: {e}")))?;
                agent
                    .actor_update(&sample.batch)
                    .map_err(|e| abort(episode, steps, format!("actor update after critic loss {loss}: {e}")))?;
                agent.soft_update();
            }
            if step.done {
                break;
            }
        }
        curve.push(CurveRow {
            episode,
            ret,
            tracking_error: err / steps.max(1) as f64,
            steps,
        });
        hook(episode, &agent)?;
    }
    Ok(DpgRun {
        initial,
        agent,
        curve,
        env_steps,
    })
}

/// Noise-free rollouts of the actor; episode `i` uses the `eval` stream with index `i`.
pub fn evaluate_dpg<E: ContinuousEnv + ?Sized>(
    agent: &DpgAgent,
    env: &mut E,
    episodes: usize,
    seeds: &SeedStreams,
) -> Result<EvalSummary> {
    let mut policy = |obs: &[f64]| agent.policy(obs);
    evaluate(env, &mut policy, episodes, |i| seeds.indexed("eval", i))
}
