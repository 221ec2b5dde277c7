//! Run directories: training, evaluation, comparison and terrain export.
//!
//! A training run directory holds
//! `config.toml` (the resolved configuration), `curve.csv`, `checkpoint.json`,
//! `init_checkpoint.json`, `init_metrics.csv`, `metrics.csv`, `run.json`, and
//! `eval_curve.csv` when periodic evaluation is enabled.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{warm_start_transitions, DepthAutopilot, HeadingAutopilot};
use crate::config::{Algorithm, EnvKind, TrainConfig};
use crate::dpg::{train_dpg_with_hook, DpgAgent, DpgCheckpoint};
use crate::env::{
    terrain_generate, ContinuousEnv, GridWorld, PipeEnv, SeafloorEnv,
};
use crate::error::{Error, Result};
use crate::eval::{run_episode, write_curve_csv, Controller, CurveRow, EpisodeMetrics, Trajectory};
use crate::pg::{train_ppo_with_hook, train_reinforce, GaussianPolicy, PolicyDocument};
use crate::approx::{Mlp, MlpDocument};
use crate::rng::SeedStreams;
use crate::tabular::{train_td_control, QTable};

pub const CONFIG_FILE: &str = "config.toml";
pub const CURVE_FILE: &str = "curve.csv";
pub const EVAL_CURVE_FILE: &str = "eval_curve.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const INIT_CHECKPOINT_FILE: &str = "init_checkpoint.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const INIT_METRICS_FILE: &str = "init_metrics.csv";
pub const RECORD_FILE: &str = "run.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.txt";

/// A serialized policy of any supported algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Checkpoint {
    TabularQ {
        n_states: usize,
        n_actions: usize,
        values: Vec<f64>,
    },
    Reinforce {
        policy: PolicyDocument,
    },
    Ppo {
        policy: PolicyDocument,
        value: MlpDocument,
    },
    Dpg(DpgCheckpoint),
    /// The PID autopilot has no parameters beyond the gains in the run config.
    Pid,
}

impl Checkpoint {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Checkpoint::TabularQ { .. } => Algorithm::TabularQ,
            Checkpoint::Reinforce { .. } => Algorithm::Reinforce,
            Checkpoint::Ppo { .. } => Algorithm::Ppo,
            Checkpoint::Dpg(_) => Algorithm::Dpg,
            Checkpoint::Pid => Algorithm::Pid,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn input_width(&self) -> Option<usize> {
        match self {
            Checkpoint::Reinforce { policy } | Checkpoint::Ppo { policy, .. } => policy.mean.widths.first().copied(),
            Checkpoint::Dpg(c) => c.actor.widths.first().copied(),
            Checkpoint::TabularQ { .. } | Checkpoint::Pid => None,
        }
    }

    fn output_width(&self) -> Option<usize> {
        match self {
            Checkpoint::Reinforce { policy } | Checkpoint::Ppo { policy, .. } => policy.mean.widths.last().copied(),
            Checkpoint::Dpg(c) => c.actor.widths.last().copied(),
            Checkpoint::TabularQ { .. } | Checkpoint::Pid => None,
        }
    }
}

/// Summary written next to the artifacts of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub environment: EnvKind,
    pub seed: u64,
    pub episodes: usize,
    pub env_steps: usize,
    pub checkpoint: String,
    pub wall_clock_seconds: f64,
}

/// Builds the continuous environment selected by `cfg`.
pub fn make_env(cfg: &TrainConfig) -> Result<Box<dyn ContinuousEnv>> {
    match cfg.environment {
        EnvKind::Seafloor => Ok(Box::new(make_seafloor(cfg)?)),
        EnvKind::Pipe => Ok(Box::new(PipeEnv::new(cfg.pipe.clone(), cfg.vehicle.clone())?)),
        EnvKind::Grid => Err(Error::Unsupported("the grid is not a continuous environment".into())),
    }
}

pub fn make_seafloor(cfg: &TrainConfig) -> Result<SeafloorEnv> {
    let seeds = SeedStreams::new(cfg.seed);
    let terrain = terrain_generate(&cfg.terrain, seeds.child_seed("terrain", cfg.terrain.seed))?;
    SeafloorEnv::new(cfg.seafloor.clone(), cfg.vehicle.clone(), terrain)
}

/// A frozen policy restored from a checkpoint, acting deterministically.
pub enum FrozenPolicy {
    Gaussian(GaussianPolicy),
    Dpg(Box<DpgAgent>),
    Depth(DepthAutopilot),
    Heading(HeadingAutopilot),
}

impl Controller for FrozenPolicy {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        match self {
            FrozenPolicy::Gaussian(p) => p.greedy_action(obs),
            FrozenPolicy::Dpg(a) => a.policy(obs),
            FrozenPolicy::Depth(d) => d.act(obs),
            FrozenPolicy::Heading(h) => h.act(obs),
        }
    }

    fn reset(&mut self) {
        match self {
            FrozenPolicy::Depth(d) => d.reset(),
            FrozenPolicy::Heading(h) => h.reset(),
            _ => {}
        }
    }
}

/// Restores `checkpoint` for `env`, checking that the network widths match.
pub fn frozen_policy(checkpoint: &Checkpoint, cfg: &TrainConfig, env: &dyn ContinuousEnv) -> Result<FrozenPolicy> {
    let (obs, act) = (env.observation_width(), env.action_limits().len());
    if let (Some(i), Some(o)) = (checkpoint.input_width(), checkpoint.output_width()) {
        if i != obs || o != act {
            return Err(Error::domain(format!(
                "checkpoint maps {i} inputs to {o} actions but the environment has {obs} observations and {act} actions"
            )));
        }
    }
    Ok(match checkpoint {
        Checkpoint::Reinforce { policy } | Checkpoint::Ppo { policy, .. } => {
            FrozenPolicy::Gaussian(GaussianPolicy::from_document(policy)?)
        }
        Checkpoint::Dpg(c) => FrozenPolicy::Dpg(Box::new(DpgAgent::from_checkpoint(c)?)),
        Checkpoint::Pid => match cfg.environment {
            EnvKind::Seafloor => FrozenPolicy::Depth(DepthAutopilot::new(
                cfg.baselines.depth.clone(),
                cfg.vehicle.clone(),
            )?),
            EnvKind::Pipe => FrozenPolicy::Heading(HeadingAutopilot::new(
                cfg.baselines.heading.clone(),
                cfg.vehicle.clone(),
                cfg.pipe.geometry()?.d_max(),
            )?),
            EnvKind::Grid => return Err(Error::Unsupported("no PID autopilot for the grid".into())),
        },
        Checkpoint::TabularQ { .. } => {
            return Err(Error::Unsupported("tabular checkpoints are evaluated on the grid".into()))
        }
    })
}

fn metrics_header(tracking_label: &str) -> [String; 6] {
    [
        "episode".into(),
        "return".into(),
        "mean_reward".into(),
        tracking_label.into(),
        "visible_fraction".into(),
        "steps".into(),
    ]
}

fn write_metrics(path: &Path, tracking_label: &str, rows: &[EpisodeMetrics]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(metrics_header(tracking_label))?;
    for (i, m) in rows.iter().enumerate() {
        w.write_record([
            i.to_string(),
            m.ret.to_string(),
            m.mean_reward.to_string(),
            m.mean_tracking_error.to_string(),
            m.visible_fraction.to_string(),
            m.steps.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_trajectory(path: &Path, header: &[&str], traj: &Trajectory) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in &traj.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Deterministic evaluation of `policy`; episode `i` resets with the `eval` stream of
/// `seeds` at index `i`. Trajectories are collected when `trajectories` is set.
pub fn rollout_episodes(
    env: &mut dyn ContinuousEnv,
    policy: &mut dyn Controller,
    episodes: usize,
    seeds: &SeedStreams,
    mut trajectories: Option<&mut Vec<Trajectory>>,
) -> Result<Vec<EpisodeMetrics>> {
    let mut out = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut rng = seeds.indexed("eval", i as u64);
        let mut traj = Trajectory::default();
        let want = trajectories.is_some();
        out.push(run_episode(env, policy, &mut rng, want.then_some(&mut traj))?);
        if let Some(t) = trajectories.as_deref_mut() {
            t.push(traj);
        }
    }
    Ok(out)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct EvalCurve {
    label: &'static str,
    rows: Vec<(usize, EpisodeSummary)>,
}

#[derive(Clone, Copy)]
struct EpisodeSummary {
    mean_reward: f64,
    tracking: f64,
    visible: f64,
}

fn summarize(rows: &[EpisodeMetrics]) -> EpisodeSummary {
    let steps: usize = rows.iter().map(|r| r.steps).sum();
    let n = steps.max(1) as f64;
    EpisodeSummary {
        mean_reward: rows.iter().map(|r| r.ret).sum::<f64>() / n,
        tracking: rows.iter().map(|r| r.mean_tracking_error * r.steps as f64).sum::<f64>() / n,
        visible: rows.iter().map(|r| r.visible_fraction * r.steps as f64).sum::<f64>() / n,
    }
}

impl EvalCurve {
    fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["episode", "mean_reward", self.label, "visible_fraction"])?;
        for (ep, s) in &self.rows {
            w.write_record([
                ep.to_string(),
                s.mean_reward.to_string(),
                s.tracking.to_string(),
                s.visible.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Trains the configured algorithm and writes a complete run directory. Returns the
/// directory path. On a numeric abort the diagnostics file is written before the
/// error is returned.
pub fn cmd_train(cfg: &TrainConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    create_dir(&dir)?;
    write_text(&dir.join(CONFIG_FILE), &cfg.to_toml_string()?)?;
    let started = Instant::now();
    let result = match cfg.algorithm {
        Algorithm::TabularQ => train_tabular(cfg, &dir),
        _ => train_continuous(cfg, &dir),
    };
    let (episodes, env_steps) = match result {
        Ok(v) => v,
        Err(e @ Error::NumericAbort { .. }) => {
            write_text(&dir.join(DIAGNOSTICS_FILE), &format!("{e}\n"))?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let record = RunRecord {
        algorithm: cfg.algorithm,
        environment: cfg.environment,
        seed: cfg.seed,
        episodes,
        env_steps,
        checkpoint: CHECKPOINT_FILE.into(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_text(&dir.join(RECORD_FILE), &serde_json::to_string_pretty(&record)?)?;
    Ok(dir)
}

fn train_tabular(cfg: &TrainConfig, dir: &Path) -> Result<(usize, usize)> {
    let world = GridWorld::new(cfg.grid.clone())?;
    let mdp = world.to_mdp();
    let seeds = SeedStreams::new(cfg.seed);
    let mut rng = seeds.stream("exploration");
    let mut tab = cfg.tabular.clone();
    tab.max_steps = cfg.grid.max_steps;
    let starts: Vec<usize> = (0..world.n_cells())
        .filter(|&c| !world.is_blocked(c) && c != world.goal())
        .collect();
    let (q, episodes) = train_td_control(&mdp, &tab, &starts, &mut rng)?;
    let path = dir.join(CURVE_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["episode", "return", "steps"])?;
    for (i, e) in episodes.iter().enumerate() {
        w.write_record([i.to_string(), e.ret.to_string(), e.steps.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let q_path = dir.join("q_table.csv");
    let f = fs::File::create(&q_path).map_err(|e| Error::io(&q_path, e))?;
    q.write_csv(f)?;
    let init = QTable::zeros(q.n_states(), q.n_actions());
    tabular_checkpoint(&q).save(&dir.join(CHECKPOINT_FILE))?;
    tabular_checkpoint(&init).save(&dir.join(INIT_CHECKPOINT_FILE))?;
    for (table, file) in [(&init, INIT_METRICS_FILE), (&q, METRICS_FILE)] {
        let rows = greedy_grid_episodes(&world, table, cfg.grid.max_steps, cfg.eval_episodes);
        write_metrics(&dir.join(file), GRID_TRACKING_LABEL, &rows)?;
    }
    let steps = episodes.iter().map(|e| e.steps).sum();
    Ok((episodes.len(), steps))
}

fn tabular_checkpoint(q: &QTable) -> Checkpoint {
    Checkpoint::TabularQ {
        n_states: q.n_states(),
        n_actions: q.n_actions(),
        values: q.values().to_vec(),
    }
}

fn train_continuous(cfg: &TrainConfig, dir: &Path) -> Result<(usize, usize)> {
    let seeds = SeedStreams::new(cfg.seed);
    let mut env = make_env(cfg)?;
    let mut eval_env = make_env(cfg)?;
    let label = env.tracking_label();
    let mut eval_curve = EvalCurve {
        label,
        rows: Vec::new(),
    };
    let eval_every = cfg.eval_every;
    let eval_episodes = cfg.eval_episodes;
    let mut periodic = |episode: usize, policy: &mut dyn Controller| -> Result<()> {
        if eval_every > 0 && (episode + 1).is_multiple_of(eval_every) {
            let rows = rollout_episodes(eval_env.as_mut(), policy, eval_episodes, &seeds, None)?;
            eval_curve.rows.push((episode, summarize(&rows)));
        }
        Ok(())
    };

    let (init, fin, curve, env_steps): (Checkpoint, Checkpoint, Vec<CurveRow>, usize) = match cfg.algorithm {
        Algorithm::Dpg => {
            let prefill = if cfg.warm_start.steps > 0 {
                let mut pid = DepthAutopilot::new(cfg.baselines.depth.clone(), cfg.vehicle.clone())?;
                let mut rng = seeds.stream("warm-start");
                let mut ws_env = make_env(cfg)?;
                warm_start_transitions(&mut pid, ws_env.as_mut(), cfg.warm_start.steps, cfg.warm_start.noise, &mut rng)?
            } else {
                Vec::new()
            };
            let run = train_dpg_with_hook(env.as_mut(), &cfg.dpg, &seeds, &prefill, &mut |ep, agent| {
                let mut p = |obs: &[f64]| agent.policy(obs);
                periodic(ep, &mut p)
            })?;
            (
                Checkpoint::Dpg(run.initial.to_checkpoint()),
                Checkpoint::Dpg(run.agent.to_checkpoint()),
                run.curve,
                run.env_steps,
            )
        }
        Algorithm::Ppo => {
            let run = train_ppo_with_hook(env.as_mut(), &cfg.ppo, &seeds, &mut |ep, policy| {
                let mut p = |obs: &[f64]| policy.greedy_action(obs);
                periodic(ep, &mut p)
            })?;
            (
                Checkpoint::Ppo {
                    policy: run.initial_policy.to_document(),
                    value: run.initial_value.to_document(),
                },
                Checkpoint::Ppo {
                    policy: run.policy.to_document(),
                    value: run.value.to_document(),
                },
                run.curve,
                run.env_steps,
            )
        }
        Algorithm::Reinforce => {
            let run = train_reinforce(env.as_mut(), &cfg.reinforce, &seeds)?;
            (
                Checkpoint::Reinforce {
                    policy: run.initial_policy.to_document(),
                },
                Checkpoint::Reinforce {
                    policy: run.policy.to_document(),
                },
                run.curve,
                run.env_steps,
            )
        }
        Algorithm::Pid => (Checkpoint::Pid, Checkpoint::Pid, Vec::new(), 0),
        Algorithm::TabularQ => unreachable!("handled by train_tabular"),
    };

    let path = dir.join(CURVE_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_curve_csv(&curve, label, file)?;
    if cfg.eval_every > 0 {
        eval_curve.write(&dir.join(EVAL_CURVE_FILE))?;
    }
    init.save(&dir.join(INIT_CHECKPOINT_FILE))?;
    fin.save(&dir.join(CHECKPOINT_FILE))?;
    for (ckpt, file) in [(&init, INIT_METRICS_FILE), (&fin, METRICS_FILE)] {
        let mut policy = frozen_policy(ckpt, cfg, env.as_ref())?;
        let rows = rollout_episodes(env.as_mut(), &mut policy, cfg.eval_episodes, &seeds, None)?;
        write_metrics(&dir.join(file), label, &rows)?;
    }
    Ok((curve.len(), env_steps))
}

/// Deterministic evaluation of a checkpoint on the environment described by `cfg`.
/// Writes `metrics.csv` and one `trajectory_NNN.csv` per episode into `out`.
pub fn cmd_eval(checkpoint: &Path, cfg: &TrainConfig, episodes: usize, out: &Path) -> Result<Vec<EpisodeMetrics>> {
    cfg.validate()?;
    let ckpt = Checkpoint::load(checkpoint)?;
    create_dir(out)?;
    if let Checkpoint::TabularQ { n_states, n_actions, values } = &ckpt {
        return eval_tabular(cfg, *n_states, *n_actions, values, episodes, out);
    }
    let mut env = make_env(cfg)?;
    let mut policy = frozen_policy(&ckpt, cfg, env.as_ref())?;
    let seeds = SeedStreams::new(cfg.seed);
    let mut trajs = Vec::new();
    let rows = rollout_episodes(env.as_mut(), &mut policy, episodes, &seeds, Some(&mut trajs))?;
    write_metrics(&out.join(METRICS_FILE), env.tracking_label(), &rows)?;
    for (i, t) in trajs.iter().enumerate() {
        write_trajectory(&out.join(format!("trajectory_{i:03}.csv")), env.trajectory_header(), t)?;
    }
    Ok(rows)
}

fn eval_tabular(
    cfg: &TrainConfig,
    n_states: usize,
    n_actions: usize,
    values: &[f64],
    episodes: usize,
    out: &Path,
) -> Result<Vec<EpisodeMetrics>> {
    let world = GridWorld::new(cfg.grid.clone())?;
    if n_states != world.n_cells() || n_actions != 4 || values.len() != n_states * n_actions {
        return Err(Error::domain(format!(
            "checkpoint holds a {n_states}×{n_actions} table but the grid needs {}×4",
            world.n_cells()
        )));
    }
    let mut q = QTable::zeros(n_states, n_actions);
    for s in 0..n_states {
        for a in 0..n_actions {
            q.set(s, a, values[s * n_actions + a]);
        }
    }
    let rows = greedy_grid_episodes(&world, &q, cfg.grid.max_steps, episodes);
    write_metrics(&out.join(METRICS_FILE), GRID_TRACKING_LABEL, &rows)?;
    Ok(rows)
}

/// The grid reports whether the greedy episode failed to reach the goal.
const GRID_TRACKING_LABEL: &str = "failed";

fn greedy_grid_episodes(world: &GridWorld, q: &QTable, max_steps: usize, episodes: usize) -> Vec<EpisodeMetrics> {
    let mut rows = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let (mut cell, mut ret, mut steps) = (world.start(), 0.0, 0usize);
        let mut done = false;
        while !done && steps < max_steps {
            let a = crate::env::GridAction::from_index(q.greedy_action(cell)).expect("four actions");
            let (next, r, d) = world.step(cell, a);
            cell = next;
            ret += r;
            steps += 1;
            done = d;
        }
        let n = steps.max(1) as f64;
        rows.push(EpisodeMetrics {
            steps,
            ret,
            mean_reward: ret / n,
            mean_tracking_error: if done { 0.0 } else { 1.0 },
            visible_fraction: 1.0,
        });
    }
    rows
}

/// Aligned summary of one run in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub run: String,
    pub algorithm: Algorithm,
    pub final_mean_reward: f64,
    pub final_tracking: f64,
    /// Sum of episode returns over the learning curve.
    pub curve_area: f64,
    /// First curve episode whose return reaches the threshold, if any.
    pub episodes_to_threshold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub environment: EnvKind,
    pub tracking_label: String,
    pub threshold: f64,
    pub rows: Vec<CompareRow>,
}

fn read_csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Domain(format!("cannot read {}", path.display())),
        _ => Error::Csv(e),
    })?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn parse(field: &str, path: &Path) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::domain(format!("malformed number `{field}` in {}", path.display())))
}

/// Reads ≥ 2 run directories over the same environment and summarizes them: final
/// evaluation metrics, learning-curve area, and episodes until the return first
/// reaches `threshold`.
pub fn cmd_compare(runs: &[PathBuf], threshold: f64) -> Result<Comparison> {
    if runs.len() < 2 {
        return Err(Error::domain("compare needs at least two run directories"));
    }
    let mut env: Option<EnvKind> = None;
    let mut label = String::new();
    let mut rows = Vec::new();
    for dir in runs {
        if !dir.is_dir() {
            return Err(Error::domain(format!("run directory {} does not exist", dir.display())));
        }
        let cfg = TrainConfig::load(&dir.join(CONFIG_FILE))?;
        match env {
            None => env = Some(cfg.environment),
            Some(e) if e != cfg.environment => {
                return Err(Error::domain(format!(
                    "cannot compare a {e} run with the {} run in {}",
                    cfg.environment,
                    dir.display()
                )))
            }
            _ => {}
        }
        let metrics_path = dir.join(METRICS_FILE);
        let (header, metrics) = read_csv_rows(&metrics_path)?;
        label = header.get(3).cloned().unwrap_or_default();
        let mut total_steps = 0.0;
        let (mut ret, mut tracking) = (0.0, 0.0);
        for m in &metrics {
            let steps = parse(&m[5], &metrics_path)?;
            total_steps += steps;
            ret += parse(&m[1], &metrics_path)?;
            tracking += parse(&m[3], &metrics_path)? * steps;
        }
        let n = if total_steps > 0.0 { total_steps } else { 1.0 };
        let curve_path = dir.join(CURVE_FILE);
        let (_, curve) = read_csv_rows(&curve_path)?;
        let mut area = 0.0;
        let mut reached = None;
        for (i, c) in curve.iter().enumerate() {
            let r = parse(&c[1], &curve_path)?;
            area += r;
            if reached.is_none() && r >= threshold {
                reached = Some(i);
            }
        }
        rows.push(CompareRow {
            run: dir.display().to_string(),
            algorithm: cfg.algorithm,
            final_mean_reward: ret / n,
            final_tracking: tracking / n,
            curve_area: area,
            episodes_to_threshold: reached,
        });
    }
    Ok(Comparison {
        environment: env.expect("at least two runs"),
        tracking_label: label,
        threshold,
        rows,
    })
}

impl Comparison {
    /// CSV with deltas against the first run.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let track = format!("final_{}", self.tracking_label);
        let delta_track = format!("delta_{}", self.tracking_label);
        w.write_record([
            "run",
            "algorithm",
            "final_mean_reward",
            track.as_str(),
            "curve_area",
            "episodes_to_threshold",
            "delta_mean_reward",
            delta_track.as_str(),
        ])?;
        let base = &self.rows[0];
        for r in &self.rows {
            w.write_record([
                r.run.clone(),
                r.algorithm.to_string(),
                r.final_mean_reward.to_string(),
                r.final_tracking.to_string(),
                r.curve_area.to_string(),
                r.episodes_to_threshold.map(|e| e.to_string()).unwrap_or_default(),
                (r.final_mean_reward - base.final_mean_reward).to_string(),
                (r.final_tracking - base.final_tracking).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "environment: {}  (threshold for episodes-to-threshold: {})\n",
            self.environment, self.threshold
        );
        s.push_str(&format!(
            "{:<32} {:>10} {:>14} {:>14} {:>14} {:>10}\n",
            "run", "algorithm", "mean_reward", self.tracking_label, "curve_area", "to_thresh"
        ));
        for r in &self.rows {
            s.push_str(&format!(
                "{:<32} {:>10} {:>14.6} {:>14.6} {:>14.3} {:>10}\n",
                r.run,
                r.algorithm.tag(),
                r.final_mean_reward,
                r.final_tracking,
                r.curve_area,
                r.episodes_to_threshold.map(|e| e.to_string()).unwrap_or_else(|| "-".into())
            ));
        }
        s
    }
}

/// Writes `x,seafloor_z,target_z` samples every `spacing` metres over the mission.
pub fn cmd_terrain_preview(cfg: &TrainConfig, spacing: f64, out: &Path) -> Result<usize> {
    if !(spacing > 0.0) {
        return Err(Error::domain("terrain sample spacing must be > 0"));
    }
    let env = make_seafloor(cfg)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let file = fs::File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["x", "seafloor_z", "target_z"])?;
    let n = (cfg.seafloor.mission_length / spacing).floor() as usize + 1;
    for i in 0..n {
        let x = i as f64 * spacing;
        w.write_record([
            x.to_string(),
            env.terrain().depth(x).to_string(),
            env.target_depth(x).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(n)
}

/// Restores a Gaussian policy checkpoint's networks (for tooling and tests).
pub fn ppo_networks_from(checkpoint: &Checkpoint) -> Result<(GaussianPolicy, Option<Mlp>)> {
    match checkpoint {
        Checkpoint::Ppo { policy, value } => Ok((GaussianPolicy::from_document(policy)?, Some(Mlp::from_document(value)?))),
        Checkpoint::Reinforce { policy } => Ok((GaussianPolicy::from_document(policy)?, None)),
        other => Err(Error::domain(format!("{} checkpoint holds no Gaussian policy", other.algorithm()))),
    }
}
