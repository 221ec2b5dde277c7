//! Decoupled rigid-body models of the vehicle.
//!
//! Two planar reductions are provided:
//!
//! * vertical plane (heave/pitch) for seafloor tracking, with surge held constant;
//! * horizontal plane (surge/sway/yaw) for pipe following.
//!
//! Each axis obeys `m·ν̇ = τ − d₁·ν − d₂·ν|ν|` (plus a `k·sin θ` restoring moment in
//! pitch). States are advanced with fixed-step classical Runge–Kutta.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(−π, π]`. Angles already in range are returned untouched.
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Vertical-plane state. `z` is positive down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub z: f64,
    pub theta: f64,
    pub w: f64,
    pub q: f64,
}

impl VehicleState {
    pub fn at_depth(z: f64) -> Self {
        Self {
            z,
            theta: 0.0,
            w: 0.0,
            q: 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        self.z.is_finite() && self.theta.is_finite() && self.w.is_finite() && self.q.is_finite()
    }
}

/// Horizontal-plane state: world position, heading and body-frame velocities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u_s: f64,
    pub v_s: f64,
    pub r_s: f64,
}

impl PlanarState {
    pub fn at_rest(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
            u_s: 0.0,
            v_s: 0.0,
            r_s: 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        [self.x, self.y, self.psi, self.u_s, self.v_s, self.r_s]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Commanded per-thruster forces in newtons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlInput(pub Vec<f64>);

impl ControlInput {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ControlInput {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Mass, damping and actuator coefficients. Masses include added mass.
///
/// Units: kg / kg·m² for masses, N·s/m / N·m·s for linear damping, N·s²/m² / N·m·s² for
/// quadratic damping, N·m/rad for the pitch restoring coefficient, N for thrust limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    pub heave_mass: f64,
    pub pitch_inertia: f64,
    pub heave_damping_lin: f64,
    pub heave_damping_quad: f64,
    pub pitch_damping_lin: f64,
    pub pitch_damping_quad: f64,
    pub pitch_restoring: f64,

    pub surge_mass: f64,
    pub sway_mass: f64,
    pub yaw_inertia: f64,
    pub surge_damping_lin: f64,
    pub surge_damping_quad: f64,
    pub sway_damping_lin: f64,
    pub sway_damping_quad: f64,
    pub yaw_damping_lin: f64,
    pub yaw_damping_quad: f64,

    /// Saturation bound of each thruster (N).
    pub thrust_limits: Vec<f64>,
    /// Rows map thruster forces to (translational force, moment). Shared by both planes:
    /// heave/pitch in the vertical model, surge/yaw in the horizontal one.
    pub allocation: [Vec<f64>; 2],
    /// Constant forward speed of the vertical-plane model (m/s).
    pub surge_speed: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let arm = 0.5;
        Self {
            heave_mass: 50.0,
            pitch_inertia: 10.0,
            heave_damping_lin: 25.0,
            heave_damping_quad: 10.0,
            pitch_damping_lin: 5.0,
            pitch_damping_quad: 2.0,
            pitch_restoring: 8.0,
            surge_mass: 50.0,
            sway_mass: 60.0,
            yaw_inertia: 10.0,
            surge_damping_lin: 20.0,
            surge_damping_quad: 10.0,
            sway_damping_lin: 40.0,
            sway_damping_quad: 20.0,
            yaw_damping_lin: 5.0,
            yaw_damping_quad: 2.0,
            thrust_limits: vec![40.0, 40.0],
            allocation: [vec![1.0, 1.0], vec![arm, -arm]],
            surge_speed: 1.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("heave_mass", self.heave_mass),
            ("pitch_inertia", self.pitch_inertia),
            ("surge_mass", self.surge_mass),
            ("sway_mass", self.sway_mass),
            ("yaw_inertia", self.yaw_inertia),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("dynamics.{name}"), "must be > 0"));
            }
        }
        let non_negative = [
            ("heave_damping_lin", self.heave_damping_lin),
            ("heave_damping_quad", self.heave_damping_quad),
            ("pitch_damping_lin", self.pitch_damping_lin),
            ("pitch_damping_quad", self.pitch_damping_quad),
            ("pitch_restoring", self.pitch_restoring),
            ("surge_damping_lin", self.surge_damping_lin),
            ("surge_damping_quad", self.surge_damping_quad),
            ("sway_damping_lin", self.sway_damping_lin),
            ("sway_damping_quad", self.sway_damping_quad),
            ("yaw_damping_lin", self.yaw_damping_lin),
            ("yaw_damping_quad", self.yaw_damping_quad),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("dynamics.{name}"), "must be >= 0"));
            }
        }
        if self.thrust_limits.is_empty() || self.thrust_limits.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::config("dynamics.thrust_limits", "each limit must be > 0"));
        }
        for row in &self.allocation {
            if row.len() != self.thrust_limits.len() {
                return Err(Error::config(
                    "dynamics.allocation",
                    format!(
                        "rows must have one column per thruster ({})",
                        self.thrust_limits.len()
                    ),
                ));
            }
        }
        if !self.surge_speed.is_finite() {
            return Err(Error::config("dynamics.surge_speed", "must be finite"));
        }
        Ok(())
    }

    pub fn thruster_count(&self) -> usize {
        self.thrust_limits.len()
    }

    /// Clamps each thruster to its limit.
    pub fn saturate(&self, input: &ControlInput) -> Result<Vec<f64>> {
        if input.0.len() != self.thruster_count() {
            return Err(Error::domain(format!(
                "control input has {} components, allocation expects {}",
                input.0.len(),
                self.thruster_count()
            )));
        }
        if input.0.iter().any(|f| !f.is_finite()) {
            return Err(Error::domain(format!("non-finite control input {:?}", input.0)));
        }
        Ok(input
            .0
            .iter()
            .zip(&self.thrust_limits)
            .map(|(f, lim)| f.clamp(-lim, *lim))
            .collect())
    }

    /// Generalized (force, moment) produced by the saturated thruster vector.
    pub fn generalized_force(&self, input: &ControlInput) -> Result<[f64; 2]> {
        let clamped = self.saturate(input)?;
        let row = |r: &Vec<f64>| r.iter().zip(&clamped).map(|(a, f)| a * f).sum::<f64>();
        Ok([row(&self.allocation[0]), row(&self.allocation[1])])
    }
}

fn damping(v: f64, lin: f64, quad: f64) -> f64 {
    lin * v + quad * v * v.abs()
}

fn rk4<const N: usize>(x: [f64; N], dt: f64, f: impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let add = |a: &[f64; N], b: &[f64; N], s: f64| {
        let mut out = *a;
        for i in 0..N {
            out[i] += s * b[i];
        }
        out
    };
    let k1 = f(&x);
    let k2 = f(&add(&x, &k1, 0.5 * dt));
    let k3 = f(&add(&x, &k2, 0.5 * dt));
    let k4 = f(&add(&x, &k3, dt));
    let mut out = x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("integration step must be > 0, got {dt}")))
    }
}

/// Advances the heave/pitch model by `dt` seconds with one RK4 step.
pub fn step_vertical(
    state: &VehicleState,
    input: &ControlInput,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    check_dt(dt)?;
    if !state.is_finite() {
        return Err(Error::domain(format!("non-finite vertical state {state:?}")));
    }
    let [tau_w, tau_q] = params.generalized_force(input)?;
    let p = params;
    let x = rk4([state.z, state.theta, state.w, state.q], dt, |s| {
        let [_, theta, w, q] = *s;
        [
            w,
            q,
            (tau_w - damping(w, p.heave_damping_lin, p.heave_damping_quad)) / p.heave_mass,
            (tau_q
                - damping(q, p.pitch_damping_lin, p.pitch_damping_quad)
                - p.pitch_restoring * theta.sin())
                / p.pitch_inertia,
        ]
    });
    let next = VehicleState {
        z: x[0],
        theta: wrap_angle(x[1]),
        w: x[2],
        q: x[3],
    };
    if !next.is_finite() {
        return Err(Error::domain(format!("integration diverged to {next:?}")));
    }
    Ok(next)
}

/// Advances the surge/sway/yaw model by `dt` seconds with one RK4 step.
pub fn step_planar(
    state: &PlanarState,
    input: &ControlInput,
    params: &VehicleParams,
    dt: f64,
) -> Result<PlanarState> {
    check_dt(dt)?;
    if !state.is_finite() {
        return Err(Error::domain(format!("non-finite planar state {state:?}")));
    }
    let [tau_u, tau_r] = params.generalized_force(input)?;
    let p = params;
    let x = rk4(
        [state.x, state.y, state.psi, state.u_s, state.v_s, state.r_s],
        dt,
        |s| {
            let [_, _, psi, u, v, r] = *s;
            let (sin, cos) = psi.sin_cos();
            [
                u * cos - v * sin,
                u * sin + v * cos,
                r,
                (tau_u - damping(u, p.surge_damping_lin, p.surge_damping_quad)) / p.surge_mass,
                -damping(v, p.sway_damping_lin, p.sway_damping_quad) / p.sway_mass,
                (tau_r - damping(r, p.yaw_damping_lin, p.yaw_damping_quad)) / p.yaw_inertia,
            ]
        },
    );
    let next = PlanarState {
        x: x[0],
        y: x[1],
        psi: wrap_angle(x[2]),
        u_s: x[3],
        v_s: x[4],
        r_s: x[5],
    };
    if !next.is_finite() {
        return Err(Error::domain(format!("integration diverged to {next:?}")));
    }
    Ok(next)
}
