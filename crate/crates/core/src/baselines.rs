//! Classical PID controllers for both tasks, usable as comparison baselines and as
//! action suppliers for pre-filling replay memory.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dpg::Transition;
use crate::dynamics::{ControlInput, VehicleParams};
use crate::env::{ContinuousEnv, PipeObservation, SeafloorObservation};
use crate::error::{Error, Result};
use crate::eval::Controller;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the accumulated error integral.
    pub integral_limit: f64,
    pub output_limit: f64,
}

impl PidGains {
    pub fn validate(&self, field: &str) -> Result<()> {
        if ![self.kp, self.ki, self.kd].iter().all(|g| g.is_finite()) {
            return Err(Error::config(field, "gains must be finite"));
        }
        if !(self.integral_limit > 0.0 && self.output_limit > 0.0) {
            return Err(Error::config(field, "integral and output limits must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

/// `clamp(kp·e + ki·∫e + kd·ė)` with a clamped integral. The derivative is a backward
/// difference and is zero on the first call.
pub fn pid_step(gains: &PidGains, state: &PidState, error: f64, dt: f64) -> Result<(f64, PidState)> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("PID step needs dt > 0, got {dt}")));
    }
    let integral = (state.integral + error * dt).clamp(-gains.integral_limit, gains.integral_limit);
    let derivative = state.prev_error.map_or(0.0, |p| (error - p) / dt);
    let raw = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    let out = raw.clamp(-gains.output_limit, gains.output_limit);
    Ok((
        out,
        PidState {
            integral,
            prev_error: Some(error),
        },
    ))
}

/// Thruster forces producing generalized force `[τ₁, τ₂]` through a 2×2 allocation.
fn allocate(params: &VehicleParams, tau: [f64; 2]) -> Result<ControlInput> {
    let b = &params.allocation;
    if b.len() != 2 || b.iter().any(|r| r.len() != 2) {
        return Err(Error::Unsupported(
            "autopilots need a two-thruster allocation".into(),
        ));
    }
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    if det.abs() < 1e-12 {
        return Err(Error::domain("thruster allocation is singular"));
    }
    Ok(ControlInput(vec![
        (b[1][1] * tau[0] - b[0][1] * tau[1]) / det,
        (-b[1][0] * tau[0] + b[0][0] * tau[1]) / det,
    ]))
}

/// Cascade depth/pitch autopilot gains. Rates come from the measured `w` and `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DepthGains {
    /// Heave force per metre of depth error (N/m).
    pub depth_kp: f64,
    /// Heave force per m/s of heave velocity (N·s/m).
    pub depth_kd: f64,
    /// Bound on the collective heave force (N).
    pub heave_limit: f64,
    /// Desired pitch per metre of depth error (rad/m).
    pub pitch_per_metre: f64,
    pub max_pitch: f64,
    /// Pitch moment per radian of pitch error (N·m/rad).
    pub pitch_kp: f64,
    /// Pitch moment per rad/s of pitch rate (N·m·s/rad).
    pub pitch_kd: f64,
    pub moment_limit: f64,
}

// Tuned by sweeping the sine-terrain benchmark for the best mean reward.
impl Default for DepthGains {
    fn default() -> Self {
        Self {
            depth_kp: 50.0,
            depth_kd: 20.0,
            heave_limit: 60.0,
            pitch_per_metre: 0.05,
            max_pitch: 0.2,
            pitch_kp: 20.0,
            pitch_kd: 10.0,
            moment_limit: 10.0,
        }
    }
}

impl DepthGains {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.depth_kp,
            self.depth_kd,
            self.heave_limit,
            self.pitch_per_metre,
            self.max_pitch,
            self.pitch_kp,
            self.pitch_kd,
            self.moment_limit,
        ];
        if all.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::config("baselines.depth", "gains must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Depth error → bounded desired pitch → differential thrust, with depth error also
/// driving the collective thrust. Positive Δz (too deep) commands upward force.
pub fn depth_autopilot(obs: &SeafloorObservation, gains: &DepthGains, params: &VehicleParams) -> Result<ControlInput> {
    let dz = obs.current_dz();
    let heave = (-gains.depth_kp * dz - gains.depth_kd * obs.w).clamp(-gains.heave_limit, gains.heave_limit);
    let theta = obs.sin_theta.atan2(obs.cos_theta);
    let theta_ref = (gains.pitch_per_metre * dz).clamp(-gains.max_pitch, gains.max_pitch);
    let moment = (gains.pitch_kp * (theta_ref - theta) - gains.pitch_kd * obs.q)
        .clamp(-gains.moment_limit, gains.moment_limit);
    allocate(params, [heave, moment])
}

#[derive(Debug, Clone)]
pub struct DepthAutopilot {
    pub gains: DepthGains,
    pub params: VehicleParams,
}

impl DepthAutopilot {
    pub fn new(gains: DepthGains, params: VehicleParams) -> Result<Self> {
        gains.validate()?;
        params.validate()?;
        Ok(Self { gains, params })
    }
}

impl Controller for DepthAutopilot {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        let o = SeafloorObservation::from_slice(obs)?;
        Ok(depth_autopilot(&o, &self.gains, &self.params)?.0)
    }
}

/// Heading autopilot gains for pipe following.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadingGains {
    /// PID on the heading error, producing a yaw moment (N·m).
    pub heading: PidGains,
    /// Approach angle per unit of normalized cross-track distance (rad).
    pub approach_gain: f64,
    pub max_approach: f64,
    /// Commanded surge speed (m/s).
    pub surge_setpoint: f64,
    /// Surge force per m/s of speed error (N·s/m).
    pub surge_kp: f64,
    pub control_period: f64,
}

// Tuned by sweeping the default straight-pipe scene for the best mean reward.
impl Default for HeadingGains {
    fn default() -> Self {
        Self {
            heading: PidGains {
                kp: 8.0,
                ki: 0.0,
                kd: 12.0,
                integral_limit: 1.0,
                output_limit: 20.0,
            },
            approach_gain: 0.75,
            max_approach: 0.6,
            surge_setpoint: 2.5,
            surge_kp: 200.0,
            control_period: 0.5,
        }
    }
}

impl HeadingGains {
    pub fn validate(&self) -> Result<()> {
        self.heading.validate("baselines.heading.heading")?;
        let all = [
            self.approach_gain,
            self.max_approach,
            self.surge_setpoint,
            self.surge_kp,
        ];
        if all.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::config("baselines.heading", "gains must be finite and >= 0"));
        }
        if !(self.control_period > 0.0) {
            return Err(Error::config("baselines.heading.control_period", "must be > 0"));
        }
        Ok(())
    }
}

/// Line-of-sight pipe follower.
///
/// The camera features give the distance to the pipe but not its side, so the
/// autopilot keeps a side estimate: it compares the measured change of d_c with the
/// change predicted for a pipe to port and flips the estimate when the two disagree.
#[derive(Debug, Clone)]
pub struct HeadingAutopilot {
    pub gains: HeadingGains,
    pub params: VehicleParams,
    d_max: f64,
    pid: PidState,
    /// +1 while the pipe is believed to lie to port, −1 to starboard.
    side: f64,
    prev: Option<PipeObservation>,
}

impl HeadingAutopilot {
    pub fn new(gains: HeadingGains, params: VehicleParams, d_max: f64) -> Result<Self> {
        gains.validate()?;
        params.validate()?;
        Ok(Self {
            gains,
            params,
            d_max,
            pid: PidState::default(),
            side: 1.0,
            prev: None,
        })
    }

    pub fn side_estimate(&self) -> f64 {
        self.side
    }

    fn update_side(&mut self, obs: &PipeObservation) {
        let Some(prev) = &self.prev else { return };
        let dt = self.gains.control_period;
        let measured = (obs.dc_norm - prev.dc_norm) * self.d_max / dt;
        // rate of d_c with the pipe to port: u·sin θ_c − v·cos θ_c
        let (u, v, th) = (
            0.5 * (obs.u_s + prev.u_s),
            0.5 * (obs.v_s + prev.v_s),
            0.5 * (obs.theta_c + prev.theta_c),
        );
        let predicted = u * th.sin() - v * th.cos();
        let near_zero = obs.dc_norm.min(prev.dc_norm) * self.d_max < 0.05;
        if predicted.abs() > 0.02 && measured.abs() > 0.02 && !near_zero && predicted * measured < 0.0 {
            self.side = -self.side;
        }
    }

    pub fn command(&mut self, obs: &PipeObservation) -> Result<ControlInput> {
        self.update_side(obs);
        let g = &self.gains;
        let cross = self.side * obs.dc_norm;
        let approach = (g.approach_gain * cross).atan().clamp(-g.max_approach, g.max_approach);
        // relative heading of the vehicle to the pipe is −θ_c
        let heading_error = approach + obs.theta_c;
        let (moment, pid) = pid_step(&g.heading, &self.pid, heading_error, g.control_period)?;
        self.pid = pid;
        let surge = g.surge_kp * (g.surge_setpoint - obs.u_s);
        self.prev = Some(obs.clone());
        let limit = self.params.thrust_limits.iter().cloned().fold(f64::INFINITY, f64::min);
        let surge_room = 2.0 * (limit - moment.abs() / self.arm()).max(0.0);
        allocate(&self.params, [surge.clamp(-surge_room, surge_room), moment])
    }

    fn arm(&self) -> f64 {
        self.params.allocation[1][0].abs().max(1e-9)
    }
}

impl Controller for HeadingAutopilot {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        let o = PipeObservation::from_slice(obs)?;
        Ok(self.command(&o)?.0)
    }

    fn reset(&mut self) {
        self.pid = PidState::default();
        self.side = 1.0;
        self.prev = None;
    }
}

/// Rolls `controller` (plus optional Gaussian noise of standard deviation
/// `noise·limit`) for up to `steps` environment steps, restarting episodes as they end.
pub fn warm_start_transitions<E, C>(
    controller: &mut C,
    env: &mut E,
    steps: usize,
    noise: f64,
    rng: &mut SimRng,
) -> Result<Vec<Transition>>
where
    E: ContinuousEnv + ?Sized,
    C: Controller + ?Sized,
{
    if steps == 0 {
        return Err(Error::domain("warm start needs at least one step"));
    }
    let limits = env.action_limits();
    let mut out = Vec::with_capacity(steps);
    controller.reset();
    let mut obs = env.reset(rng);
    let mut in_episode = 0;
    while out.len() < steps {
        let mut u = controller.act(&obs)?;
        if noise > 0.0 {
            for (a, l) in u.iter_mut().zip(&limits) {
                let n: f64 = rng.sample(StandardNormal);
                *a = (*a + n * noise * l).clamp(-l, *l);
            }
        } else {
            for (a, l) in u.iter_mut().zip(&limits) {
                *a = a.clamp(-l, *l);
            }
        }
        let step = env.step(&u)?;
        in_episode += 1;
        out.push(Transition {
            s: std::mem::take(&mut obs),
            u,
            r: step.reward,
            s_next: step.obs.clone(),
            done: step.terminal,
        });
        obs = step.obs;
        if step.done || in_episode >= env.max_steps() {
            controller.reset();
            obs = env.reset(rng);
            in_episode = 0;
        }
    }
    Ok(out)
}
