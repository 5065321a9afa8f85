//! Friction-circle demand and the feasibility check used by action mapping.
//!
//! The demand is evaluated on the zero-slip single-track motion at the constraint
//! state `(v_x, delta)`: yaw rate `v_x tan(delta) / (lf + lr)`, lateral velocity
//! `lr * omega`, body-frame lateral acceleration `omega v_x + lr * d(omega)/dt`. The
//! tires must transmit `F_tx` longitudinally and `m a_y` laterally, split between the
//! axles by the yaw moment balance. Only `v_x`, `delta` and the input enter, so the
//! admissible input set is a function of `(v_x, delta)` alone.

use serde::{Deserialize, Serialize};

use super::dynamics::{longitudinal_accel, steering_rate};
use super::forces::{longitudinal_force, resistance_forces};
use super::{ControlInput, VehicleParams, VehicleState, DEFAULT_DT};

/// Forces acting on the car for one state and input (N).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceBreakdown {
    /// Longitudinal tire force, traction minus braking.
    pub longitudinal: f64,
    pub lateral_front: f64,
    pub lateral_rear: f64,
    pub aero: f64,
    pub rolling: f64,
    /// `|(F_tx, F_yf + F_yr)|`.
    pub resultant: f64,
}

impl ForceBreakdown {
    pub fn lateral(&self) -> f64 {
        self.lateral_front + self.lateral_rear
    }

    /// Resultant force expressed as an acceleration (m/s^2).
    pub fn resultant_accel(&self, p: &VehicleParams) -> f64 {
        self.resultant / p.mass
    }
}

/// How far ahead [`check_friction`] looks with the input held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckHorizon {
    pub steps: usize,
    pub dt: f64,
}

impl Default for CheckHorizon {
    fn default() -> Self {
        CheckHorizon {
            steps: 1,
            dt: DEFAULT_DT,
        }
    }
}

/// Tire-force demand at constraint state `(vx, delta)` under `input`.
pub fn friction_demand(vx: f64, delta: f64, input: &ControlInput, p: &VehicleParams) -> ForceBreakdown {
    let vx = vx.max(0.0);
    let longitudinal = longitudinal_force(vx, input, p);
    let (aero, rolling) = resistance_forces(vx, p);
    let vx_dot = longitudinal_accel(vx, input, p);
    let delta_dot = steering_rate(delta, input.uy, p);

    let l = p.wheelbase();
    let tan = delta.tan();
    let omega = vx * tan / l;
    let omega_dot = (vx_dot * tan + vx * (1.0 + tan * tan) * delta_dot) / l;
    let lateral_accel = omega * vx + p.lr * omega_dot;

    let lateral_total = p.mass * lateral_accel;
    let lateral_front = (lateral_total * p.lr + p.yaw_inertia * omega_dot) / l;
    let lateral_rear = (lateral_total * p.lf - p.yaw_inertia * omega_dot) / l;
    ForceBreakdown {
        longitudinal,
        lateral_front,
        lateral_rear,
        aero,
        rolling,
        resultant: longitudinal.hypot(lateral_front + lateral_rear),
    }
}

/// Tire forces the car needs at `state` under `input`.
pub fn resultant_tire_force(state: &VehicleState, input: &ControlInput, p: &VehicleParams) -> ForceBreakdown {
    friction_demand(state.vx, state.delta, input, p)
}

/// True iff holding `input` keeps the tire demand inside the friction circle.
///
/// The constraint state is integrated for `horizon.steps` RK4 steps; the demand is
/// checked at the initial state, at every RK4 stage state and after each step. The final
/// state must also admit the zero input, so a feasible input never leaves the car where
/// coasting would break the limit.
pub fn check_friction(
    state: &VehicleState,
    input: &ControlInput,
    horizon: &CheckHorizon,
    p: &VehicleParams,
) -> bool {
    let limit = p.friction_limit();
    let within = |vx: f64, delta: f64, u: &ControlInput| friction_demand(vx, delta, u, p).resultant <= limit;
    let rates = |vx: f64, delta: f64| {
        (
            longitudinal_accel(vx, input, p),
            steering_rate(delta, input.uy, p),
        )
    };

    let (mut vx, mut delta) = (state.vx.max(0.0), state.delta);
    if !within(vx, delta, input) {
        return false;
    }
    let dt = horizon.dt;
    for _ in 0..horizon.steps {
        let k1 = rates(vx, delta);
        let s2 = (vx + 0.5 * dt * k1.0, delta + 0.5 * dt * k1.1);
        if !within(s2.0, s2.1, input) {
            return false;
        }
        let k2 = rates(s2.0, s2.1);
        let s3 = (vx + 0.5 * dt * k2.0, delta + 0.5 * dt * k2.1);
        if !within(s3.0, s3.1, input) {
            return false;
        }
        let k3 = rates(s3.0, s3.1);
        let s4 = (vx + dt * k3.0, delta + dt * k3.1);
        if !within(s4.0, s4.1, input) {
            return false;
        }
        let k4 = rates(s4.0, s4.1);
        vx = (vx + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0)).max(0.0);
        delta = (delta + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1)).clamp(-p.max_steer, p.max_steer);
        if !within(vx, delta, input) {
            return false;
        }
    }
    within(vx, delta, &ControlInput::ZERO)
}
