//! Race-driving episodes: observation, reward, termination and lap bookkeeping.

mod trajectory;

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::DynamicsError;
use crate::mapping::ActionMapper;
use crate::track::{terminal_predicates, LapEvent, Track, TrackPose, DEFAULT_FORWARD_DISTANCES};
use crate::vehicle::{
    check_friction, resultant_tire_force, rk4_step, CheckHorizon, ControlInput, VehicleParams,
    VehicleState, DEFAULT_DT,
};

pub use trajectory::{TrajectoryRow, TRAJECTORY_COLUMNS};

/// Reward added on leaving the track, driving the wrong way, or breaking the friction
/// limit in penalty mode.
pub const EVENT_PENALTY: f64 = -100.0;

/// Straight stretches shorter than this are not used for random starts (m).
const MIN_START_STRAIGHT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// Actions pass through the friction-constrained action mapping.
    Am,
    /// Actions are applied directly; friction violations are penalized.
    Penalty,
    /// Actions are applied directly; violations are only counted.
    None,
}

impl std::str::FromStr for ConstraintMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "am" => Ok(ConstraintMode::Am),
            "penalty" => Ok(ConstraintMode::Penalty),
            "none" => Ok(ConstraintMode::None),
            other => Err(format!("unknown constraint mode `{other}` (am, penalty, none)")),
        }
    }
}

impl std::fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConstraintMode::Am => "am",
            ConstraintMode::Penalty => "penalty",
            ConstraintMode::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub max_steps: usize,
    /// Random start speed range (m/s).
    pub init_speed: (f64, f64),
    pub mode: ConstraintMode,
    /// Whether a penalty-mode friction violation ends the episode.
    pub penalty_terminates: bool,
    pub v_norm: f64,
    pub omega_norm: f64,
    pub d_max: f64,
    pub forward_distances: Vec<f64>,
    pub dt: f64,
    pub horizon: CheckHorizon,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            max_steps: 10_000,
            init_speed: (0.0, 30.0),
            mode: ConstraintMode::Am,
            penalty_terminates: true,
            v_norm: 30.0,
            omega_norm: 3.0,
            d_max: 200.0,
            forward_distances: DEFAULT_FORWARD_DISTANCES.to_vec(),
            dt: DEFAULT_DT,
            horizon: CheckHorizon::default(),
        }
    }
}

impl EnvConfig {
    pub fn observation_dim(&self) -> usize {
        5 + 2 * self.forward_distances.len()
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let (lo, hi) = self.init_speed;
        let bad = |m: String| Err(EnvError::Config(m));
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= self.v_norm) {
            return bad(format!("initial speed range [{lo}, {hi}] outside [0, {}]", self.v_norm));
        }
        for (name, v) in [
            ("v_norm", self.v_norm),
            ("omega_norm", self.omega_norm),
            ("d_max", self.d_max),
            ("dt", self.dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.forward_distances.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("forward distances must be finite and non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment configuration: {0}")]
    Config(String),
    #[error("episode is over; call reset before stepping")]
    Done,
    #[error("action must be finite, got {0:?}")]
    BadAction([f64; 2]),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// `v_x cos(phi)` plus the event penalties. The friction penalty applies only in penalty
/// mode.
pub fn compute_reward(
    vx: f64,
    phi: f64,
    off_track: bool,
    wrong_way: bool,
    friction_violation: bool,
    mode: ConstraintMode,
) -> f64 {
    let mut r = vx * phi.cos();
    if off_track {
        r += EVENT_PENALTY;
    }
    if wrong_way {
        r += EVENT_PENALTY;
    }
    if friction_violation && mode == ConstraintMode::Penalty {
        r += EVENT_PENALTY;
    }
    r
}

/// Scales raw quantities into the network input box.
pub fn normalize_observation(
    state: &VehicleState,
    pose: &TrackPose,
    forward: &[[f64; 2]],
    p: &VehicleParams,
    cfg: &EnvConfig,
) -> Vec<f64> {
    let mut obs = Vec::with_capacity(5 + 2 * forward.len());
    obs.push((state.vx / cfg.v_norm).clamp(0.0, 1.0));
    obs.push((state.omega / cfg.omega_norm).clamp(-1.0, 1.0));
    obs.push((state.delta / p.max_steer).clamp(-1.0, 1.0));
    obs.push(pose.d_c.clamp(-1.0, 1.0));
    obs.push(pose.phi / PI);
    for v in forward {
        obs.push((v[0] / cfg.d_max).clamp(-1.0, 1.0));
        obs.push((v[1] / cfg.d_max).clamp(-1.0, 1.0));
    }
    obs
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Control actually applied to the car.
    pub control: [f64; 2],
    /// Resultant tire force demanded by the applied control (N).
    pub friction_force: f64,
    pub friction_violation: bool,
    pub off_track: bool,
    pub wrong_way: bool,
    pub lap: LapEvent,
    /// Duration of the lap completed on this step (s).
    pub lap_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Episode ended by an event; no bootstrapping from the next observation.
    pub terminal: bool,
    /// Episode ended by the step budget.
    pub truncated: bool,
    pub info: StepInfo,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

#[derive(Debug, Clone)]
pub struct RaceEnv {
    params: VehicleParams,
    track: Arc<Track>,
    mapper: Option<Arc<ActionMapper>>,
    cfg: EnvConfig,
    starts: Vec<(f64, f64)>,
    state: VehicleState,
    pose: TrackPose,
    steps: usize,
    time: f64,
    done: bool,
    crossings: i64,
    laps: u32,
    last_lap_at: f64,
    lap_times: Vec<f64>,
    violations: u64,
}

impl RaceEnv {
    /// A mapper is required in AM mode and ignored otherwise.
    pub fn new(
        params: VehicleParams,
        track: Arc<Track>,
        mapper: Option<Arc<ActionMapper>>,
        cfg: EnvConfig,
    ) -> Result<Self, EnvError> {
        cfg.validate()?;
        params
            .validate()
            .map_err(|e| EnvError::Config(e.to_string()))?;
        if cfg.mode == ConstraintMode::Am && mapper.is_none() {
            return Err(EnvError::Config("AM mode needs an action mapper".into()));
        }
        let starts = track.straights(MIN_START_STRAIGHT);
        if starts.is_empty() {
            return Err(EnvError::Config(format!(
                "track has no straight of at least {MIN_START_STRAIGHT} m for random starts"
            )));
        }
        let pose = track.pose(track.point_at(0.0), track.tangent_at(0.0), None);
        Ok(RaceEnv {
            params,
            track,
            mapper,
            cfg,
            starts,
            state: VehicleState::default(),
            pose,
            steps: 0,
            time: 0.0,
            done: true,
            crossings: 0,
            laps: 0,
            last_lap_at: 0.0,
            lap_times: Vec::new(),
            violations: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn track(&self) -> &Track {
        &self.track
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn pose(&self) -> &TrackPose {
        &self.pose
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn laps(&self) -> u32 {
        self.laps
    }

    pub fn lap_times(&self) -> &[f64] {
        &self.lap_times
    }

    /// Friction-check failures of applied controls since the last reset.
    pub fn violations(&self) -> u64 {
        self.violations
    }

    pub fn observation_dim(&self) -> usize {
        self.cfg.observation_dim()
    }

    /// Random start on a straight with a random speed; deterministic in `seed`.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total: f64 = self.starts.iter().map(|s| s.1).sum();
        let mut u = rng.gen_range(0.0..total);
        let mut s = self.starts[0].0;
        for &(start, len) in &self.starts {
            if u < len {
                s = start + u;
                break;
            }
            u -= len;
        }
        let (lo, hi) = self.cfg.init_speed;
        let speed = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        self.reset_at(s, speed)
    }

    /// Starts on the centerline at station `s`, aligned with the track.
    pub fn reset_at(&mut self, s: f64, speed: f64) -> Vec<f64> {
        let s = self.track.normalize_s(s);
        let pos = self.track.point_at(s);
        self.state = VehicleState {
            x: pos[0],
            y: pos[1],
            psi: self.track.tangent_at(s),
            vx: speed.max(0.0),
            ..Default::default()
        };
        self.pose = self.track.pose(pos, self.state.psi, Some(s));
        self.steps = 0;
        self.time = 0.0;
        self.done = false;
        // off the finish line the first forward crossing only starts the lap clock
        self.crossings = if s == self.track.finish_s() { 0 } else { -1 };
        self.laps = 0;
        self.last_lap_at = 0.0;
        self.lap_times.clear();
        self.violations = 0;
        self.observe()
    }

    pub fn observe(&self) -> Vec<f64> {
        let fo = self.track.forward_observation(
            self.pose.s,
            [self.state.x, self.state.y],
            self.state.psi,
            &self.cfg.forward_distances,
        );
        normalize_observation(&self.state, &self.pose, &fo.vectors, &self.params, &self.cfg)
    }

    /// Control that would be applied for virtual action `a` in the current state.
    pub fn control_for(&self, a: [f64; 2]) -> [f64; 2] {
        let a = [a[0].clamp(-1.0, 1.0), a[1].clamp(-1.0, 1.0)];
        match (self.cfg.mode, &self.mapper) {
            (ConstraintMode::Am, Some(m)) => m.map(&self.state, a),
            _ => a,
        }
    }

    pub fn step(&mut self, a: [f64; 2]) -> Result<Step, EnvError> {
        if self.done {
            return Err(EnvError::Done);
        }
        if !(a[0].is_finite() && a[1].is_finite()) {
            return Err(EnvError::BadAction(a));
        }
        let u = self.control_for(a);
        let input = ControlInput::from_array(u);
        let friction_force = resultant_tire_force(&self.state, &input, &self.params).resultant;
        let violation = !check_friction(&self.state, &input, &self.cfg.horizon, &self.params);
        let next = rk4_step(&self.state, &input, self.cfg.dt, &self.params)?;

        let prev_s = self.pose.s;
        self.state = next;
        self.pose = self.track.pose([next.x, next.y], next.psi, Some(prev_s));
        self.steps += 1;
        self.time = self.steps as f64 * self.cfg.dt;

        let lap = self.track.lap_events(prev_s, self.pose.s);
        let mut lap_time = None;
        if lap.crossed_finish {
            self.crossings += if lap.completes_lap() { 1 } else { -1 };
            if self.crossings == 0 && self.laps == 0 && lap.completes_lap() {
                self.last_lap_at = self.time;
            } else if self.crossings > self.laps as i64 {
                self.laps += 1;
                let t = self.time - self.last_lap_at;
                self.lap_times.push(t);
                self.last_lap_at = self.time;
                lap_time = Some(t);
            }
        }

        let events = terminal_predicates(&self.pose);
        if violation {
            self.violations += 1;
        }
        let friction_end = violation && self.cfg.mode == ConstraintMode::Penalty && self.cfg.penalty_terminates;
        let reward = compute_reward(
            next.vx,
            self.pose.phi,
            events.off_track,
            events.wrong_way,
            violation,
            self.cfg.mode,
        );
        let terminal = events.any() || friction_end;
        let truncated = !terminal && self.steps >= self.cfg.max_steps;
        self.done = terminal || truncated;
        Ok(Step {
            observation: self.observe(),
            reward,
            terminal,
            truncated,
            info: StepInfo {
                control: u,
                friction_force,
                friction_violation: violation,
                off_track: events.off_track,
                wrong_way: events.wrong_way,
                lap,
                lap_time,
            },
        })
    }
}
