use super::forces::{lateral_forces, longitudinal_force, resistance_forces};
use super::{ControlInput, VehicleParams, VehicleState, V_SWITCH};
use crate::angle::wrap_angle;
use crate::error::DynamicsError;

/// Sideslip of the zero-slip kinematic model (rad).
pub fn kinematic_sideslip(delta: f64, p: &VehicleParams) -> f64 {
    (p.lr * delta.tan() / p.wheelbase()).atan()
}

/// Yaw rate of the zero-slip kinematic model for longitudinal speed `vx` (rad/s).
///
/// With speed `v = vx / cos(beta)` this is `v tan(delta) cos(beta) / (lf + lr)`.
pub fn kinematic_yaw_rate(vx: f64, delta: f64, p: &VehicleParams) -> f64 {
    vx * delta.tan() / p.wheelbase()
}

/// `dv_x/dt` under `input`; never pushes a stopped car backwards.
pub fn longitudinal_accel(vx: f64, input: &ControlInput, p: &VehicleParams) -> f64 {
    let vx = vx.max(0.0);
    let (aero, roll) = resistance_forces(vx, p);
    let accel = (longitudinal_force(vx, input, p) - aero - roll) / p.mass;
    if vx <= 0.0 && accel < 0.0 {
        0.0
    } else {
        accel
    }
}

/// Steering-actuator rate; zero when it would push `|delta|` past the limit.
pub fn steering_rate(delta: f64, uy: f64, p: &VehicleParams) -> f64 {
    let rate = uy * p.max_steer_rate;
    if (delta >= p.max_steer && rate > 0.0) || (delta <= -p.max_steer && rate < 0.0) {
        0.0
    } else {
        rate
    }
}

/// Time derivative of the state, returned in the layout of [`VehicleState`].
///
/// Above [`V_SWITCH`] the slip-angle tire model drives `v_y` and `omega`. At or below
/// it the kinematic model sets heading rate and sideslip directly and the `v_y`/`omega`
/// rates are zero; [`rk4_step`] re-assigns those two states after each step.
pub fn state_derivative(
    state: &VehicleState,
    input: &ControlInput,
    p: &VehicleParams,
) -> Result<VehicleState, DynamicsError> {
    let vx_dot = longitudinal_accel(state.vx, input, p);
    let delta_dot = steering_rate(state.delta, input.uy, p);

    let d = if state.vx > V_SWITCH {
        let (fyf, fyr) = lateral_forces(state, p)?;
        let vy_dot = (fyf + fyr) / p.mass - state.omega * state.vx;
        let omega_dot = (fyf * p.lf - fyr * p.lr) / p.yaw_inertia;
        let v = state.speed();
        let course = state.psi + state.sideslip();
        VehicleState {
            x: v * course.cos(),
            y: v * course.sin(),
            psi: state.omega,
            vx: vx_dot,
            vy: vy_dot,
            omega: omega_dot,
            delta: delta_dot,
        }
    } else {
        let vx = state.vx.max(0.0);
        let beta = kinematic_sideslip(state.delta, p);
        let v = vx / beta.cos();
        let course = state.psi + beta;
        VehicleState {
            x: v * course.cos(),
            y: v * course.sin(),
            psi: kinematic_yaw_rate(vx, state.delta, p),
            vx: vx_dot,
            vy: 0.0,
            omega: 0.0,
            delta: delta_dot,
        }
    };
    if d.is_finite() {
        Ok(d)
    } else {
        Err(DynamicsError::NonFinite {
            what: "state derivative",
        })
    }
}

/// One classical Runge-Kutta step with `input` held over `dt`.
pub fn rk4_step(
    state: &VehicleState,
    input: &ControlInput,
    dt: f64,
    p: &VehicleParams,
) -> Result<VehicleState, DynamicsError> {
    let k1 = state_derivative(state, input, p)?;
    let k2 = state_derivative(&state.add_scaled(&k1, 0.5 * dt), input, p)?;
    let k3 = state_derivative(&state.add_scaled(&k2, 0.5 * dt), input, p)?;
    let k4 = state_derivative(&state.add_scaled(&k3, dt), input, p)?;

    let s = state.to_array();
    let (a, b, c, e) = (k1.to_array(), k2.to_array(), k3.to_array(), k4.to_array());
    let mut next = VehicleState::from_array(std::array::from_fn(|i| {
        s[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + e[i])
    }));

    next.vx = next.vx.max(0.0);
    next.delta = next.delta.clamp(-p.max_steer, p.max_steer);
    next.psi = wrap_angle(next.psi);
    if next.vx <= V_SWITCH {
        next.vy = next.vx * kinematic_sideslip(next.delta, p).tan();
        next.omega = kinematic_yaw_rate(next.vx, next.delta, p);
    }
    if next.is_finite() {
        Ok(next)
    } else {
        Err(DynamicsError::NonFinite { what: "state" })
    }
}
