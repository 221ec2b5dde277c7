//! Seafloor depth tracking in the vertical plane.
//!
//! The vehicle cruises at constant surge over a terrain profile and must hold a fixed
//! altitude `z_r` above it. Observations carry the last `N` depth errors so the policy
//! can infer the terrain trend.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::terrain::TerrainProfile;
use super::{ContinuousEnv, Step};
use crate::dynamics::{step_vertical, ControlInput, VehicleParams, VehicleState};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Reward weights. All terms are penalties: `rho ≤ 0` and `effort` negative semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeafloorRewardWeights {
    /// Weights on Δz², w² and q².
    pub rho: [f64; 3],
    /// Symmetric weight matrix R of the uᵀRu effort term.
    pub effort: Vec<Vec<f64>>,
}

impl Default for SeafloorRewardWeights {
    fn default() -> Self {
        Self {
            rho: [-1.0, -0.1, -0.1],
            effort: vec![vec![-0.01, 0.0], vec![0.0, -0.01]],
        }
    }
}

impl SeafloorRewardWeights {
    pub fn zero(n: usize) -> Self {
        Self {
            rho: [0.0; 3],
            effort: vec![vec![0.0; n]; n],
        }
    }

    pub fn validate(&self, thrusters: usize) -> Result<()> {
        if self.rho.iter().any(|r| !(*r <= 0.0)) {
            return Err(Error::config("seafloor.reward.rho", "weights must be <= 0"));
        }
        let n = self.effort.len();
        if n != thrusters || self.effort.iter().any(|row| row.len() != n) {
            return Err(Error::config(
                "seafloor.reward.effort",
                format!("must be a {thrusters}x{thrusters} matrix"),
            ));
        }
        for i in 0..n {
            for j in 0..n {
                if !self.effort[i][j].is_finite()
                    || (self.effort[i][j] - self.effort[j][i]).abs() > 1e-12
                {
                    return Err(Error::config("seafloor.reward.effort", "must be symmetric"));
                }
            }
        }
        // −R must admit a Cholesky factorization after a tiny diagonal shift.
        let scale = self.effort.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let shift = 1e-12 * scale.max(1.0);
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = -self.effort[i][j] + if i == j { shift } else { 0.0 };
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::config(
                            "seafloor.reward.effort",
                            "must be negative semidefinite",
                        ));
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        Ok(())
    }
}

/// `r = ρ₁Δz² + ρ₂w² + ρ₃q² + uᵀRu`.
pub fn seafloor_reward(weights: &SeafloorRewardWeights, dz: f64, w: f64, q: f64, u: &[f64]) -> f64 {
    let [r1, r2, r3] = weights.rho;
    let mut effort = 0.0;
    for (i, row) in weights.effort.iter().enumerate() {
        for (j, rij) in row.iter().enumerate() {
            effort += u[i] * rij * u[j];
        }
    }
    r1 * dz * dz + r2 * w * w + r3 * q * q + effort
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeafloorConfig {
    /// Number N of retained depth errors.
    pub history_len: usize,
    /// Commanded altitude above the seafloor, z_r (m).
    pub altitude: f64,
    /// Initial depth error Δz at reset (m).
    pub initial_offset: f64,
    /// Half-width of the uniform jitter added to the initial offset (m).
    pub offset_jitter: f64,
    /// Along-track distance that completes an episode (m).
    pub mission_length: f64,
    /// Control period (s).
    pub control_period: f64,
    /// RK4 sub-steps per control period.
    pub substeps: usize,
    /// Episodes end once |Δz| exceeds this bound (m).
    pub abort_bound: f64,
    pub reward: SeafloorRewardWeights,
}

impl Default for SeafloorConfig {
    fn default() -> Self {
        Self {
            history_len: 3,
            altitude: 2.0,
            initial_offset: 0.0,
            offset_jitter: 1.0,
            mission_length: 100.0,
            control_period: 0.5,
            substeps: 5,
            abort_bound: 10.0,
            reward: SeafloorRewardWeights::default(),
        }
    }
}

impl SeafloorConfig {
    pub fn validate(&self, params: &VehicleParams) -> Result<()> {
        if self.history_len < 1 {
            return Err(Error::config("seafloor.history_len", "must be >= 1"));
        }
        if !(self.control_period > 0.0) {
            return Err(Error::config("seafloor.control_period", "must be > 0"));
        }
        if self.substeps < 1 {
            return Err(Error::config("seafloor.substeps", "must be >= 1"));
        }
        if !(self.mission_length > 0.0) {
            return Err(Error::config("seafloor.mission_length", "must be > 0"));
        }
        if !(self.abort_bound > 0.0) {
            return Err(Error::config("seafloor.abort_bound", "must be > 0"));
        }
        if !(self.offset_jitter >= 0.0) || !self.initial_offset.is_finite() {
            return Err(Error::config(
                "seafloor.offset_jitter",
                "jitter must be >= 0 and offset finite",
            ));
        }
        if !(params.surge_speed > 0.0) {
            return Err(Error::config(
                "dynamics.surge_speed",
                "must be > 0 for seafloor tracking",
            ));
        }
        self.reward.validate(params.thruster_count())
    }
}

/// `[Δz_{t−N+1} … Δz_t, cos θ, sin θ, w, q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeafloorObservation {
    /// Oldest first; the last element is the current Δz.
    pub dz_history: Vec<f64>,
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub w: f64,
    pub q: f64,
}

impl SeafloorObservation {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.dz_history.clone();
        v.extend([self.cos_theta, self.sin_theta, self.w, self.q]);
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() < 5 {
            return Err(Error::domain(format!(
                "seafloor observation needs at least 5 entries, got {}",
                v.len()
            )));
        }
        let n = v.len() - 4;
        Ok(Self {
            dz_history: v[..n].to_vec(),
            cos_theta: v[n],
            sin_theta: v[n + 1],
            w: v[n + 2],
            q: v[n + 3],
        })
    }

    pub fn current_dz(&self) -> f64 {
        *self.dz_history.last().expect("history is never empty")
    }
}

#[derive(Debug, Clone)]
struct LastStep {
    action: Vec<f64>,
    reward: f64,
}

#[derive(Debug, Clone)]
pub struct SeafloorEnv {
    cfg: SeafloorConfig,
    params: VehicleParams,
    terrain: TerrainProfile,
    state: VehicleState,
    x_along: f64,
    t: f64,
    steps: usize,
    history: Vec<f64>,
    done: bool,
    last: Option<LastStep>,
}

impl SeafloorEnv {
    pub fn new(cfg: SeafloorConfig, params: VehicleParams, terrain: TerrainProfile) -> Result<Self> {
        params.validate()?;
        cfg.validate(&params)?;
        let mut env = Self {
            history: Vec::with_capacity(cfg.history_len),
            cfg,
            params,
            terrain,
            state: VehicleState::at_depth(0.0),
            x_along: 0.0,
            t: 0.0,
            steps: 0,
            done: true,
            last: None,
        };
        env.reset_with_offset(env.cfg.initial_offset);
        Ok(env)
    }

    pub fn config(&self) -> &SeafloorConfig {
        &self.cfg
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn terrain(&self) -> &TerrainProfile {
        &self.terrain
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn x_along(&self) -> f64 {
        self.x_along
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Target depth z_r-relative: seafloor depth minus the commanded altitude.
    pub fn target_depth(&self, x: f64) -> f64 {
        self.terrain.depth(x) - self.cfg.altitude
    }

    pub fn depth_error(&self) -> f64 {
        self.state.z - self.target_depth(self.x_along)
    }

    /// Places the vehicle at the mission start, at rest, `offset` metres below the
    /// target depth.
    pub fn reset_with_offset(&mut self, offset: f64) -> SeafloorObservation {
        self.x_along = 0.0;
        self.t = 0.0;
        self.steps = 0;
        self.state = VehicleState::at_depth(self.target_depth(0.0) + offset);
        let dz = self.depth_error();
        self.history.clear();
        self.history.resize(self.cfg.history_len, dz);
        self.done = false;
        self.last = None;
        self.observation()
    }

    pub fn observation(&self) -> SeafloorObservation {
        SeafloorObservation {
            dz_history: self.history.clone(),
            cos_theta: self.state.theta.cos(),
            sin_theta: self.state.theta.sin(),
            w: self.state.w,
            q: self.state.q,
        }
    }

    /// Applies `action` for one control period.
    pub fn step_control(&mut self, action: &ControlInput) -> Result<(SeafloorObservation, f64, bool)> {
        if self.done {
            return Err(Error::domain("seafloor episode is finished; call reset"));
        }
        let applied = self.params.saturate(action)?;
        let input = ControlInput(applied.clone());
        let dt = self.cfg.control_period / self.cfg.substeps as f64;
        for _ in 0..self.cfg.substeps {
            self.state = step_vertical(&self.state, &input, &self.params, dt)?;
        }
        self.steps += 1;
        self.t = self.steps as f64 * self.cfg.control_period;
        self.x_along = self.params.surge_speed * self.t;
        let dz = self.depth_error();
        self.history.remove(0);
        self.history.push(dz);
        let reward = seafloor_reward(&self.cfg.reward, dz, self.state.w, self.state.q, &applied);
        self.done = self.x_along >= self.cfg.mission_length - 1e-9 || dz.abs() > self.cfg.abort_bound;
        self.last = Some(LastStep {
            action: applied,
            reward,
        });
        Ok((self.observation(), reward, self.done))
    }
}

const SEAFLOOR_COLUMNS: &[&str] = &[
    "t", "x_along", "seafloor_z", "target_z", "z", "theta", "w", "q", "u1", "u2", "reward",
];

impl ContinuousEnv for SeafloorEnv {
    fn observation_width(&self) -> usize {
        self.cfg.history_len + 4
    }

    fn action_limits(&self) -> Vec<f64> {
        self.params.thrust_limits.clone()
    }

    fn reset(&mut self, rng: &mut SimRng) -> Vec<f64> {
        let jitter = if self.cfg.offset_jitter > 0.0 {
            rng.random_range(-self.cfg.offset_jitter..=self.cfg.offset_jitter)
        } else {
            0.0
        };
        self.reset_with_offset(self.cfg.initial_offset + jitter).to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let (obs, reward, done) = self.step_control(&ControlInput(action.to_vec()))?;
        Ok(Step {
            obs: obs.to_vec(),
            reward,
            done,
            terminal: false,
        })
    }

    fn max_steps(&self) -> usize {
        (self.cfg.mission_length / (self.params.surge_speed * self.cfg.control_period) - 1e-9).ceil()
            as usize
    }

    fn tracking_error(&self) -> f64 {
        self.depth_error().abs()
    }

    fn tracking_label(&self) -> &'static str {
        "mean_abs_dz"
    }

    fn trajectory_header(&self) -> &'static [&'static str] {
        SEAFLOOR_COLUMNS
    }

    fn trajectory_row(&self) -> Vec<f64> {
        let (u, reward) = match &self.last {
            Some(l) => (l.action.clone(), l.reward),
            None => (vec![0.0; self.params.thruster_count()], 0.0),
        };
        vec![
            self.t,
            self.x_along,
            self.terrain.depth(self.x_along),
            self.target_depth(self.x_along),
            self.state.z,
            self.state.theta,
            self.state.w,
            self.state.q,
            u.first().copied().unwrap_or(0.0),
            u.get(1).copied().unwrap_or(0.0),
            reward,
        ]
    }
}
