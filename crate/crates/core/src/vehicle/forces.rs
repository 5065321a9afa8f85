use super::{ControlInput, VehicleParams, VehicleState, ROLLING_EPS, V_SWITCH};
use crate::error::DynamicsError;

/// Drive force at the wheels for motor command `um` in `[0, 1]` (N).
///
/// Constant torque up to the base speed, then capped by the motor power.
pub fn traction_force(vx: f64, um: f64, p: &VehicleParams) -> f64 {
    let torque_limited = p.torque_coeff * um / p.wheel_radius;
    if vx > p.v_base() {
        torque_limited.min(p.max_power / vx)
    } else {
        torque_limited
    }
}

/// Brake force magnitude for brake command `ub` in `[0, 1]` (N).
pub fn braking_force(ub: f64, p: &VehicleParams) -> f64 {
    p.brake_coeff * ub
}

/// Aerodynamic drag and rolling resistance magnitudes (N).
pub fn resistance_forces(vx: f64, p: &VehicleParams) -> (f64, f64) {
    let aero = 0.5 * p.air_density * p.drag_coeff * p.frontal_area * vx * vx;
    let roll = if vx > ROLLING_EPS {
        p.rolling_coeff * p.mass * p.gravity
    } else {
        0.0
    };
    (aero, roll)
}

/// Longitudinal tire force `F_tx`: traction minus braking (N).
pub fn longitudinal_force(vx: f64, input: &ControlInput, p: &VehicleParams) -> f64 {
    let (um, ub) = input.motor_brake();
    traction_force(vx.max(0.0), um, p) - braking_force(ub, p)
}

/// Front and rear axle lateral forces from the linear slip-angle tire model (N).
///
/// Only defined in the dynamic regime `vx > V_SWITCH`.
pub fn lateral_forces(state: &VehicleState, p: &VehicleParams) -> Result<(f64, f64), DynamicsError> {
    if !(state.vx > V_SWITCH) {
        return Err(DynamicsError::LowSpeed {
            vx: state.vx,
            v_switch: V_SWITCH,
        });
    }
    let front_dir = ((state.vy + state.omega * p.lf) / state.vx).atan();
    let rear_dir = ((state.vy - state.omega * p.lr) / state.vx).atan();
    let fyf = 2.0 * p.c_alpha_f * (state.delta - front_dir);
    let fyr = 2.0 * p.c_alpha_r * (-rear_dir);
    Ok((fyf, fyr))
}
