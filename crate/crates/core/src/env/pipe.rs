//! Pipe following with a downward-looking camera, reduced to analytic image features.
//!
//! The camera footprint is a `W × H` rectangle centred on the vehicle. Its x axis points
//! to starboard and its y axis along the heading. The pipe is an infinite straight line.
//! Two features describe the projected pipe: `d_c`, the distance from the footprint
//! centre to the pipe line, and `θ_c`, the angle of that distance line against the
//! footprint x axis (a pipe parallel to the heading gives `θ_c = 0`).

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ContinuousEnv, Step};
use crate::dynamics::{step_planar, ControlInput, PlanarState, VehicleParams};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Distances below this are treated as "centre on the pipe".
const DEGENERATE_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeGeometry {
    pub anchor: [f64; 2],
    direction: [f64; 2],
    pub footprint_width: f64,
    pub footprint_height: f64,
}

impl PipeGeometry {
    pub fn new(anchor: [f64; 2], direction: [f64; 2], width: f64, height: f64) -> Result<Self> {
        let norm = direction[0].hypot(direction[1]);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::config("pipe.direction", "must be a non-zero vector"));
        }
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::config("pipe.footprint", "width and height must be > 0"));
        }
        if !(anchor[0].is_finite() && anchor[1].is_finite()) {
            return Err(Error::config("pipe.anchor", "must be finite"));
        }
        Ok(Self {
            anchor,
            direction: [direction[0] / norm, direction[1] / norm],
            footprint_width: width,
            footprint_height: height,
        })
    }

    pub fn direction(&self) -> [f64; 2] {
        self.direction
    }

    /// Half the footprint diagonal.
    pub fn d_max(&self) -> f64 {
        0.5 * self.footprint_width.hypot(self.footprint_height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeFeatures {
    pub d_c: f64,
    pub theta_c: f64,
    pub visible: bool,
}

/// Maps a line angle (defined modulo π) into `(−π/2, π/2]`.
fn wrap_half(angle: f64) -> f64 {
    let r = angle.rem_euclid(PI);
    if r > FRAC_PI_2 {
        r - PI
    } else {
        r
    }
}

/// Projects the pipe into the camera footprint of a vehicle in `state`.
pub fn pipe_features(state: &PlanarState, geom: &PipeGeometry) -> PipeFeatures {
    let (sin, cos) = state.psi.sin_cos();
    // camera axes in world coordinates
    let lateral = [sin, -cos];
    let forward = [cos, sin];
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];

    let rel = [geom.anchor[0] - state.x, geom.anchor[1] - state.y];
    let p = [dot(rel, lateral), dot(rel, forward)];
    let d = [dot(geom.direction, lateral), dot(geom.direction, forward)];

    // foot of the perpendicular from the footprint centre
    let along = dot(p, d);
    let foot = [p[0] - along * d[0], p[1] - along * d[1]];
    let d_c = foot[0].hypot(foot[1]);

    let theta_c = if d_c > DEGENERATE_DISTANCE {
        wrap_half(foot[1].atan2(foot[0]))
    } else {
        // pipe direction measured from the forward axis
        wrap_half((-d[0]).atan2(d[1]))
    };

    // unit normal of the line in camera coordinates
    let normal = [-d[1], d[0]];
    let reach = 0.5 * geom.footprint_width * normal[0].abs()
        + 0.5 * geom.footprint_height * normal[1].abs();
    PipeFeatures {
        d_c,
        theta_c,
        visible: d_c <= reach,
    }
}

/// `r = u·(|cos θ_c| − d_c/d_max)`.
pub fn pipe_reward(surge: f64, theta_c: f64, d_c: f64, d_max: f64) -> f64 {
    surge * (theta_c.cos().abs() - d_c / d_max)
}

/// `[θ_c, d_c/d_max, u_s, v_s, r_s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PipeObservation {
    pub theta_c: f64,
    pub dc_norm: f64,
    pub u_s: f64,
    pub v_s: f64,
    pub r_s: f64,
}

impl PipeObservation {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.theta_c, self.dc_norm, self.u_s, self.v_s, self.r_s]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != 5 {
            return Err(Error::domain(format!(
                "pipe observation has 5 entries, got {}",
                v.len()
            )));
        }
        Ok(Self {
            theta_c: v[0],
            dc_norm: v[1],
            u_s: v[2],
            v_s: v[3],
            r_s: v[4],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipeConfig {
    pub anchor: [f64; 2],
    pub direction: [f64; 2],
    /// Footprint extent along the camera x (starboard) axis (m).
    pub footprint_width: f64,
    /// Footprint extent along the heading (m).
    pub footprint_height: f64,
    /// Start position offset to starboard of the pipe (m); the vehicle starts at rest.
    pub lateral_offset: f64,
    /// Start heading relative to the pipe direction (rad, counter-clockwise positive).
    pub heading_offset: f64,
    /// Half-widths of uniform jitter applied to the two offsets at reset.
    pub offset_jitter: f64,
    pub heading_jitter: f64,
    pub control_period: f64,
    pub substeps: usize,
    pub max_steps: usize,
}

impl Default for PipeConfig {
    fn default() -> Self {
        Self {
            anchor: [0.0, 0.0],
            direction: [1.0, 0.0],
            footprint_width: 4.0,
            footprint_height: 3.0,
            lateral_offset: 1.0,
            heading_offset: 0.3,
            offset_jitter: 0.0,
            heading_jitter: 0.0,
            control_period: 0.5,
            substeps: 5,
            max_steps: 100,
        }
    }
}

impl PipeConfig {
    pub fn geometry(&self) -> Result<PipeGeometry> {
        PipeGeometry::new(
            self.anchor,
            self.direction,
            self.footprint_width,
            self.footprint_height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        if !(self.control_period > 0.0) {
            return Err(Error::config("pipe.control_period", "must be > 0"));
        }
        if self.substeps < 1 {
            return Err(Error::config("pipe.substeps", "must be >= 1"));
        }
        if self.max_steps < 1 {
            return Err(Error::config("pipe.max_steps", "must be >= 1"));
        }
        if !(self.offset_jitter >= 0.0 && self.heading_jitter >= 0.0) {
            return Err(Error::config("pipe.offset_jitter", "jitters must be >= 0"));
        }
        if !(self.lateral_offset.is_finite() && self.heading_offset.is_finite()) {
            return Err(Error::config("pipe.lateral_offset", "offsets must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct LastStep {
    action: Vec<f64>,
    reward: f64,
}

#[derive(Debug, Clone)]
pub struct PipeEnv {
    cfg: PipeConfig,
    geom: PipeGeometry,
    params: VehicleParams,
    state: PlanarState,
    features: PipeFeatures,
    steps: usize,
    done: bool,
    last: Option<LastStep>,
}

impl PipeEnv {
    pub fn new(cfg: PipeConfig, params: VehicleParams) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let geom = cfg.geometry()?;
        let state = PlanarState::at_rest(0.0, 0.0, 0.0);
        let features = pipe_features(&state, &geom);
        let mut env = Self {
            cfg,
            geom,
            params,
            state,
            features,
            steps: 0,
            done: true,
            last: None,
        };
        env.reset_with_offsets(env.cfg.lateral_offset, env.cfg.heading_offset);
        Ok(env)
    }

    pub fn geometry(&self) -> &PipeGeometry {
        &self.geom
    }

    pub fn state(&self) -> &PlanarState {
        &self.state
    }

    pub fn features(&self) -> PipeFeatures {
        self.features
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    /// Starts at rest `lateral` metres to starboard of the pipe anchor, heading
    /// `heading` radians from the pipe direction.
    pub fn reset_with_offsets(&mut self, lateral: f64, heading: f64) -> PipeObservation {
        let [dx, dy] = self.geom.direction();
        let starboard = [dy, -dx];
        let pipe_heading = dy.atan2(dx);
        self.state = PlanarState::at_rest(
            self.geom.anchor[0] + lateral * starboard[0],
            self.geom.anchor[1] + lateral * starboard[1],
            pipe_heading + heading,
        );
        self.features = pipe_features(&self.state, &self.geom);
        self.steps = 0;
        self.done = false;
        self.last = None;
        self.observation()
    }

    /// Replaces the state directly, e.g. to probe rewards at chosen poses.
    pub fn set_state(&mut self, state: PlanarState) {
        self.state = state;
        self.features = pipe_features(&self.state, &self.geom);
    }

    pub fn observation(&self) -> PipeObservation {
        PipeObservation {
            theta_c: self.features.theta_c,
            dc_norm: self.features.d_c / self.geom.d_max(),
            u_s: self.state.u_s,
            v_s: self.state.v_s,
            r_s: self.state.r_s,
        }
    }

    pub fn current_reward(&self) -> f64 {
        pipe_reward(
            self.state.u_s,
            self.features.theta_c,
            self.features.d_c,
            self.geom.d_max(),
        )
    }

    pub fn step_control(&mut self, action: &ControlInput) -> Result<(PipeObservation, f64, bool)> {
        if self.done {
            return Err(Error::domain("pipe episode is finished; call reset"));
        }
        let applied = self.params.saturate(action)?;
        let input = ControlInput(applied.clone());
        let dt = self.cfg.control_period / self.cfg.substeps as f64;
        for _ in 0..self.cfg.substeps {
            self.state = step_planar(&self.state, &input, &self.params, dt)?;
        }
        self.steps += 1;
        self.features = pipe_features(&self.state, &self.geom);
        let reward = self.current_reward();
        self.done = !self.features.visible || self.steps >= self.cfg.max_steps;
        self.last = Some(LastStep {
            action: applied,
            reward,
        });
        Ok((self.observation(), reward, self.done))
    }
}

const PIPE_COLUMNS: &[&str] = &[
    "t", "x", "y", "psi", "u_s", "v_s", "r_s", "d_c", "theta_c", "visible", "u1", "u2", "reward",
];

impl ContinuousEnv for PipeEnv {
    fn observation_width(&self) -> usize {
        5
    }

    fn action_limits(&self) -> Vec<f64> {
        self.params.thrust_limits.clone()
    }

    fn reset(&mut self, rng: &mut SimRng) -> Vec<f64> {
        let mut jitter = |h: f64| if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 };
        let lateral = self.cfg.lateral_offset + jitter(self.cfg.offset_jitter);
        let heading = self.cfg.heading_offset + jitter(self.cfg.heading_jitter);
        self.reset_with_offsets(lateral, heading).to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let (obs, reward, done) = self.step_control(&ControlInput(action.to_vec()))?;
        Ok(Step {
            obs: obs.to_vec(),
            reward,
            done,
            terminal: !self.features.visible,
        })
    }

    fn max_steps(&self) -> usize {
        self.cfg.max_steps
    }

    fn tracking_error(&self) -> f64 {
        self.features.d_c / self.geom.d_max()
    }

    fn tracking_label(&self) -> &'static str {
        "mean_dc_norm"
    }

    fn target_visible(&self) -> bool {
        self.features.visible
    }

    fn trajectory_header(&self) -> &'static [&'static str] {
        PIPE_COLUMNS
    }

    fn trajectory_row(&self) -> Vec<f64> {
        let (u, reward) = match &self.last {
            Some(l) => (l.action.clone(), l.reward),
            None => (vec![0.0; self.params.thruster_count()], 0.0),
        };
        let s = &self.state;
        vec![
            self.steps as f64 * self.cfg.control_period,
            s.x,
            s.y,
            s.psi,
            s.u_s,
            s.v_s,
            s.r_s,
            self.features.d_c,
            self.features.theta_c,
            if self.features.visible { 1.0 } else { 0.0 },
            u.first().copied().unwrap_or(0.0),
            u.get(1).copied().unwrap_or(0.0),
            reward,
        ]
    }
}
