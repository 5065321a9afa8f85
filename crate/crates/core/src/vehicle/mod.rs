//! Single-track vehicle model with an electric drivetrain and a friction-circle limit.

mod dynamics;
mod forces;
mod friction;
mod params;

pub use dynamics::{
    kinematic_sideslip, kinematic_yaw_rate, longitudinal_accel, rk4_step, state_derivative,
    steering_rate,
};
pub use forces::{braking_force, lateral_forces, longitudinal_force, resistance_forces, traction_force};
pub use friction::{check_friction, friction_demand, resultant_tire_force, CheckHorizon, ForceBreakdown};
pub use params::{VehicleParams, PARAM_KEYS};

use serde::{Deserialize, Serialize};

/// Default integration step (s).
pub const DEFAULT_DT: f64 = 0.01;

/// Below or at this longitudinal speed the zero-slip kinematic model replaces the
/// slip-angle tire model (m/s).
pub const V_SWITCH: f64 = 1.0;

/// Rolling resistance vanishes at or below this speed (m/s).
pub const ROLLING_EPS: f64 = 0.1;

/// Dynamic state of the car. Positions and heading are in the earth frame, velocities
/// in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Heading (rad).
    pub psi: f64,
    /// Longitudinal velocity (m/s).
    pub vx: f64,
    /// Lateral velocity (m/s).
    pub vy: f64,
    /// Yaw rate (rad/s).
    pub omega: f64,
    /// Front-wheel steering angle (rad).
    pub delta: f64,
}

impl VehicleState {
    pub fn to_array(&self) -> [f64; 7] {
        [self.x, self.y, self.psi, self.vx, self.vy, self.omega, self.delta]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        VehicleState {
            x: a[0],
            y: a[1],
            psi: a[2],
            vx: a[3],
            vy: a[4],
            omega: a[5],
            delta: a[6],
        }
    }

    /// `self + h * rate`, component-wise.
    pub fn add_scaled(&self, rate: &VehicleState, h: f64) -> Self {
        let a = self.to_array();
        let b = rate.to_array();
        Self::from_array(std::array::from_fn(|i| a[i] + h * b[i]))
    }

    /// Speed of the center of gravity (m/s).
    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    /// Vehicle sideslip angle (rad).
    pub fn sideslip(&self) -> f64 {
        self.vy.atan2(self.vx)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Normalized control: `ux` blends motor (positive) and brake (negative), `uy` is the
/// steering-rate command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub ux: f64,
    pub uy: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { ux: 0.0, uy: 0.0 };

    /// Clamps both channels into `[-1, 1]`.
    pub fn clamped(ux: f64, uy: f64) -> Self {
        ControlInput {
            ux: ux.clamp(-1.0, 1.0),
            uy: uy.clamp(-1.0, 1.0),
        }
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self::clamped(a[0], a[1])
    }

    pub fn to_array(&self) -> [f64; 2] {
        [self.ux, self.uy]
    }

    /// Motor and brake commands; the two are never applied together.
    pub fn motor_brake(&self) -> (f64, f64) {
        if self.ux >= 0.0 {
            (self.ux, 0.0)
        } else {
            (0.0, -self.ux)
        }
    }
}
