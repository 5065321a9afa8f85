use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Step;
use crate::track::TrackPose;
use crate::vehicle::VehicleState;

pub const TRAJECTORY_COLUMNS: [&str; 17] = [
    "t", "X", "Y", "psi", "v_x", "v_y", "omega", "delta", "a_x_virtual", "a_y_virtual", "u_x", "u_y",
    "F_xy", "reward", "s", "d_c", "phi",
];

/// One row of a rollout log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub state: VehicleState,
    pub action: [f64; 2],
    pub control: [f64; 2],
    pub friction_force: f64,
    pub reward: f64,
    pub s: f64,
    pub d_c: f64,
    pub phi: f64,
}

impl TrajectoryRow {
    /// Row for the state right after a reset.
    pub fn initial(state: &VehicleState, pose: &TrackPose) -> Self {
        TrajectoryRow {
            t: 0.0,
            state: *state,
            action: [0.0; 2],
            control: [0.0; 2],
            friction_force: 0.0,
            reward: 0.0,
            s: pose.s,
            d_c: pose.d_c,
            phi: pose.phi,
        }
    }

    pub fn after_step(t: f64, state: &VehicleState, pose: &TrackPose, action: [f64; 2], step: &Step) -> Self {
        TrajectoryRow {
            t,
            state: *state,
            action,
            control: step.info.control,
            friction_force: step.info.friction_force,
            reward: step.reward,
            s: pose.s,
            d_c: pose.d_c,
            phi: pose.phi,
        }
    }

    pub fn header() -> String {
        TRAJECTORY_COLUMNS.join(",")
    }

    pub fn to_csv(&self) -> String {
        let s = &self.state;
        let cols = [
            self.t,
            s.x,
            s.y,
            s.psi,
            s.vx,
            s.vy,
            s.omega,
            s.delta,
            self.action[0],
            self.action[1],
            self.control[0],
            self.control[1],
            self.friction_force,
            self.reward,
            self.s,
            self.d_c,
            self.phi,
        ];
        let mut out = String::new();
        for (i, c) in cols.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{c}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_matches_header() {
        let pose = TrackPose {
            s: 1.0,
            d_raw: 0.0,
            d_c: 0.0,
            phi: 0.0,
            tangent: 0.0,
        };
        let row = TrajectoryRow::initial(&VehicleState::default(), &pose);
        assert_eq!(row.to_csv().split(',').count(), TrajectoryRow::header().split(',').count());
        assert!(TrajectoryRow::header().starts_with("t,X,Y,psi,v_x"));
    }
}
