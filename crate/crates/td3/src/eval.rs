use amrace_core::env::{EnvError, RaceEnv};
use amrace_core::vehicle::VehicleParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Td3Agent;
use crate::mlp::Float;

/// Deterministic mapping from observations to virtual actions.
pub trait Policy {
    fn act(&self, obs: &[f64]) -> [f64; 2];
}

impl<T: Float> Policy for Td3Agent<T> {
    fn act(&self, obs: &[f64]) -> [f64; 2] {
        Td3Agent::act(self, obs)
    }
}

impl<F: Fn(&[f64]) -> [f64; 2]> Policy for F {
    fn act(&self, obs: &[f64]) -> [f64; 2] {
        self(obs)
    }
}

/// Holds `u = (0, 0)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn act(&self, _obs: &[f64]) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// Pure-pursuit steering on the first forward-observation point with a proportional
/// speed controller. Reads only the normalized observation.
#[derive(Debug, Clone)]
pub struct LineFollower {
    pub target_speed: f64,
    pub v_norm: f64,
    pub d_max: f64,
    pub wheelbase: f64,
    pub max_steer: f64,
    pub max_steer_rate: f64,
    pub speed_gain: f64,
    /// Steering-rate gain (1/s).
    pub steer_gain: f64,
}

impl LineFollower {
    pub fn new(p: &VehicleParams, v_norm: f64, d_max: f64, target_speed: f64) -> Self {
        LineFollower {
            target_speed,
            v_norm,
            d_max,
            wheelbase: p.wheelbase(),
            max_steer: p.max_steer,
            max_steer_rate: p.max_steer_rate,
            speed_gain: 0.5,
            steer_gain: 10.0,
        }
    }
}

impl Policy for LineFollower {
    fn act(&self, obs: &[f64]) -> [f64; 2] {
        let v = obs[0] * self.v_norm;
        let delta = obs[2] * self.max_steer;
        let (x, y) = (obs[5] * self.d_max, obs[6] * self.d_max);
        let ld2 = (x * x + y * y).max(1e-6);
        let want = (2.0 * self.wheelbase * y / ld2).atan().clamp(-self.max_steer, self.max_steer);
        let ux = self.speed_gain * (self.target_speed - v);
        let uy = self.steer_gain * (want - delta) / self.max_steer_rate;
        [ux.clamp(-1.0, 1.0), uy.clamp(-1.0, 1.0)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Start speed range on the finish line (m/s).
    pub start_speed: (f64, f64),
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 20,
            seed: 0,
            start_speed: (0.0, 30.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub start_speed: f64,
    pub steps: usize,
    pub reward: f64,
    pub laps: u32,
    pub lap_times: Vec<f64>,
    /// Duration of the second lap.
    pub flying_lap: Option<f64>,
    pub violations: u64,
    pub off_track: bool,
    pub wrong_way: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: Vec<EpisodeResult>,
    pub success_rate: f64,
    pub best_flying_lap: Option<f64>,
    pub mean_reward: f64,
    pub violations: u64,
}

impl EvalReport {
    pub fn from_episodes(episodes: Vec<EpisodeResult>) -> Self {
        let n = episodes.len().max(1) as f64;
        let successes = episodes.iter().filter(|e| e.success).count();
        let best_flying_lap = episodes
            .iter()
            .filter(|e| e.success)
            .filter_map(|e| e.flying_lap)
            .reduce(f64::min);
        EvalReport {
            success_rate: successes as f64 / n,
            best_flying_lap,
            mean_reward: episodes.iter().map(|e| e.reward).sum::<f64>() / n,
            violations: episodes.iter().map(|e| e.violations).sum(),
            episodes,
        }
    }
}

/// Runs one noise-free episode from the finish line until the step budget or a fault.
pub fn run_episode<P: Policy + ?Sized>(policy: &P, env: &mut RaceEnv, start_speed: f64) -> Result<EpisodeResult, EnvError> {
    let finish = env.track().finish_s();
    let mut obs = env.reset_at(finish, start_speed);
    let mut reward = 0.0;
    let mut off_track = false;
    let mut wrong_way = false;
    loop {
        let step = env.step(policy.act(&obs))?;
        reward += step.reward;
        off_track |= step.info.off_track;
        wrong_way |= step.info.wrong_way;
        obs = step.observation;
        if step.terminal || step.truncated {
            break;
        }
    }
    let lap_times = env.lap_times().to_vec();
    let violations = env.violations();
    Ok(EpisodeResult {
        start_speed,
        steps: env.steps(),
        reward,
        laps: env.laps(),
        flying_lap: lap_times.get(1).copied(),
        lap_times,
        violations,
        off_track,
        wrong_way,
        success: env.laps() >= 2 && !off_track && !wrong_way && violations == 0,
    })
}

/// Evaluates `policy` over `cfg.episodes` episodes with seeded start speeds.
pub fn evaluate<P: Policy + ?Sized>(policy: &P, env: &mut RaceEnv, cfg: &EvalConfig) -> Result<EvalReport, EnvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.start_speed;
    let mut episodes = Vec::with_capacity(cfg.episodes);
    for _ in 0..cfg.episodes {
        let v = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        episodes.push(run_episode(policy, env, v)?);
    }
    Ok(EvalReport::from_episodes(episodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use amrace_core::env::{ConstraintMode, EnvConfig};
    use amrace_core::track::{Builtin, Track};
    use std::sync::Arc;

    fn env() -> RaceEnv {
        let cfg = EnvConfig {
            mode: ConstraintMode::None,
            ..Default::default()
        };
        RaceEnv::new(
            VehicleParams::default(),
            Arc::new(Track::from_builtin(Builtin::OvalShort)),
            None,
            cfg,
        )
        .unwrap()
    }

    #[test]
    fn zero_policy_never_laps() {
        let mut e = env();
        let r = evaluate(&ZeroPolicy, &mut e, &EvalConfig { episodes: 2, ..Default::default() }).unwrap();
        assert_eq!(r.success_rate, 0.0);
        assert!(r.episodes.iter().all(|e| !e.success && e.laps == 0));
        assert_eq!(r.best_flying_lap, None);
    }

    #[test]
    fn slow_line_follower_laps_at_the_kinematic_pace() {
        let mut e = env();
        let p = VehicleParams::default();
        let v = 16.0;
        let pol = LineFollower::new(&p, e.config().v_norm, e.config().d_max, v);
        let res = run_episode(&pol, &mut e, v).unwrap();
        assert!(res.success, "{res:?}");
        let estimate = e.track().length() / v;
        let flying = res.flying_lap.unwrap();
        assert!((flying - estimate).abs() <= 0.1 * estimate, "{flying} vs {estimate}");
    }

    #[test]
    fn success_rate_is_a_fraction_of_episodes() {
        let ep = |success| EpisodeResult {
            start_speed: 0.0,
            steps: 1,
            reward: 1.0,
            laps: if success { 2 } else { 0 },
            lap_times: vec![],
            flying_lap: None,
            violations: 0,
            off_track: false,
            wrong_way: false,
            success,
        };
        let r = EvalReport::from_episodes(vec![ep(true), ep(false), ep(false), ep(true), ep(true)]);
        assert_eq!(r.success_rate, 0.6);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let p = VehicleParams::default();
        let mut e = env();
        let pol = LineFollower::new(&p, 30.0, 200.0, 15.0);
        let cfg = EvalConfig { episodes: 2, seed: 5, start_speed: (5.0, 15.0) };
        let a = evaluate(&pol, &mut e, &cfg).unwrap();
        let b = evaluate(&pol, &mut e, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
