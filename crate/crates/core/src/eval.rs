//! Frozen-policy rollouts and their summary metrics.

use crate::env::ContinuousEnv;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Anything that maps observations to actions during a rollout.
pub trait Controller {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>>;

    /// Clears internal state between episodes.
    fn reset(&mut self) {}
}

impl<F> Controller for F
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        self(obs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub steps: usize,
    pub ret: f64,
    pub mean_reward: f64,
    /// Mean of [`ContinuousEnv::tracking_error`] over the episode's steps.
    pub mean_tracking_error: f64,
    pub visible_fraction: f64,
}

/// Per-step trajectory of one episode, in the environment's column layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub rows: Vec<Vec<f64>>,
}

/// Runs one episode from `reset(rng)` until done or the step cap.
pub fn run_episode<E: ContinuousEnv + ?Sized, C: Controller + ?Sized>(
    env: &mut E,
    controller: &mut C,
    rng: &mut SimRng,
    mut trajectory: Option<&mut Trajectory>,
) -> Result<EpisodeMetrics> {
    controller.reset();
    let mut obs = env.reset(rng);
    if let Some(t) = trajectory.as_deref_mut() {
        t.rows.push(env.trajectory_row());
    }
    let cap = env.max_steps();
    let (mut steps, mut ret, mut err, mut visible) = (0usize, 0.0, 0.0, 0usize);
    while steps < cap {
        let action = controller.act(&obs)?;
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain(format!("controller produced a non-finite action {action:?}")));
        }
        let step = env.step(&action)?;
        steps += 1;
        ret += step.reward;
        err += env.tracking_error();
        if env.target_visible() {
            visible += 1;
        }
        if let Some(t) = trajectory.as_deref_mut() {
            t.rows.push(env.trajectory_row());
        }
        obs = step.obs;
        if step.done {
            break;
        }
    }
    let n = steps.max(1) as f64;
    Ok(EpisodeMetrics {
        steps,
        ret,
        mean_reward: ret / n,
        mean_tracking_error: err / n,
        visible_fraction: visible as f64 / n,
    })
}

/// Aggregate over several episodes, each step weighted equally.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub episodes: Vec<EpisodeMetrics>,
}

impl EvalSummary {
    fn total_steps(&self) -> f64 {
        self.episodes.iter().map(|e| e.steps).sum::<usize>().max(1) as f64
    }

    pub fn mean_reward(&self) -> f64 {
        self.episodes.iter().map(|e| e.ret).sum::<f64>() / self.total_steps()
    }

    pub fn mean_tracking_error(&self) -> f64 {
        self.episodes
            .iter()
            .map(|e| e.mean_tracking_error * e.steps as f64)
            .sum::<f64>()
            / self.total_steps()
    }

    pub fn visible_fraction(&self) -> f64 {
        self.episodes
            .iter()
            .map(|e| e.visible_fraction * e.steps as f64)
            .sum::<f64>()
            / self.total_steps()
    }

    pub fn mean_return(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().map(|e| e.ret).sum::<f64>() / self.episodes.len() as f64
    }
}

/// Evaluates `controller` on `episodes` episodes; episode `i` is reset with
/// `episode_rng(i)`, so results do not depend on evaluation order.
pub fn evaluate<E, C, R>(
    env: &mut E,
    controller: &mut C,
    episodes: usize,
    mut episode_rng: R,
) -> Result<EvalSummary>
where
    E: ContinuousEnv + ?Sized,
    C: Controller + ?Sized,
    R: FnMut(u64) -> SimRng,
{
    let mut out = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut rng = episode_rng(i as u64);
        out.push(run_episode(env, controller, &mut rng, None)?);
    }
    Ok(EvalSummary { episodes: out })
}

/// One row of a learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub episode: usize,
    pub ret: f64,
    pub tracking_error: f64,
    pub steps: usize,
}

/// Writes `episode,return,<tracking label>,steps` rows.
pub fn write_curve_csv<W: std::io::Write>(rows: &[CurveRow], tracking_label: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "return", tracking_label, "steps"])?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.ret.to_string(),
            r.tracking_error.to_string(),
            r.steps.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
