use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use amrace_core::env::RaceEnv;
use amrace_core::fsutil::write_atomic;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Td3Agent, Td3Config, TrainError};
use crate::checkpoint::Checkpoint;
use crate::eval::{evaluate, EvalConfig, EvalReport};
use crate::mlp::Float;
use crate::replay::ReplayBuffer;

pub const METRICS_HEADER: &str = "iteration,episode,reward,loss_c1,loss_c2,violations_cum,lap_time,success";
pub const EVAL_HEADER: &str = "iteration,success_rate,mean_reward,best_flying_lap,violations";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Environment steps to run.
    pub iterations: u64,
    pub seed: u64,
    /// Steps between evaluations; 0 disables them.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Start speed range of evaluation episodes (m/s).
    pub eval_start_speed: (f64, f64),
    /// Steps between checkpoints; 0 keeps only the final one.
    pub checkpoint_interval: u64,
    /// Stop once this many friction-violation steps have been recorded.
    pub stop_after_violations: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 300_000,
            seed: 0,
            eval_interval: 10_000,
            eval_episodes: 5,
            eval_start_speed: (0.0, 30.0),
            checkpoint_interval: 50_000,
            stop_after_violations: None,
        }
    }
}

/// Snapshot passed to the progress callback after every episode and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Progress {
    pub iteration: u64,
    pub episode: u64,
    pub episode_reward: f64,
    pub violations: u64,
    pub eval: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub iterations: u64,
    pub episodes: u64,
    pub updates: u64,
    /// Steps whose control violated the friction limit.
    pub violations: u64,
    /// Episodes ended by a friction violation.
    pub violation_terminations: u64,
    pub best_lap: Option<f64>,
    pub stopped_early: bool,
    pub last_eval: Option<EvalReport>,
}

/// Independent random stream `k` of the root seed.
pub fn seed_stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

struct Outputs {
    dir: Option<PathBuf>,
    metrics: String,
    evals: String,
}

impl Outputs {
    fn flush(&self) -> Result<(), TrainError> {
        if let Some(dir) = &self.dir {
            write_atomic(&dir.join("metrics.csv"), self.metrics.as_bytes()).map_err(|e| TrainError::Io(e.to_string()))?;
            write_atomic(&dir.join("eval.csv"), self.evals.as_bytes()).map_err(|e| TrainError::Io(e.to_string()))?;
        }
        Ok(())
    }

    fn checkpoint<T: Float>(&self, agent: &Td3Agent<T>, iteration: u64, name: &str) -> Result<(), TrainError> {
        if let Some(dir) = &self.dir {
            Checkpoint::from_agent(agent, iteration)
                .save(&dir.join(name))
                .map_err(|e| TrainError::Io(e.to_string()))?;
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trains a fresh agent on `env`.
///
/// When `out` is given it receives `metrics.csv` (one row per finished episode),
/// `eval.csv`, periodic checkpoints under `checkpoints/` and `final.td3c`. Evaluation
/// runs on a clone of `env`.
pub fn train<T: Float>(
    env: &mut RaceEnv,
    td3: Td3Config,
    cfg: &TrainConfig,
    out: Option<&Path>,
    mut on_progress: impl FnMut(&Progress) -> ControlFlow<()>,
) -> Result<(Td3Agent<T>, TrainSummary), TrainError> {
    let obs_dim = env.observation_dim();
    let mut agent: Td3Agent<T> = Td3Agent::new(obs_dim, td3, seed_stream(cfg.seed, 0).next_u64())?;
    let mut buffer: ReplayBuffer<T> = ReplayBuffer::new(agent.cfg.buffer_size, obs_dim);
    let mut sample_rng = seed_stream(cfg.seed, 1);
    let mut reset_rng = seed_stream(cfg.seed, 2);
    let eval_seed = seed_stream(cfg.seed, 3).next_u64();
    let mut eval_env = env.clone();

    if let Some(dir) = out {
        std::fs::create_dir_all(dir.join("checkpoints")).map_err(|e| TrainError::Io(format!("{}: {e}", dir.display())))?;
    }
    let mut outputs = Outputs {
        dir: out.map(Path::to_path_buf),
        metrics: format!("{METRICS_HEADER}\n"),
        evals: format!("{EVAL_HEADER}\n"),
    };

    let mut summary = TrainSummary {
        iterations: 0,
        episodes: 0,
        updates: 0,
        violations: 0,
        violation_terminations: 0,
        best_lap: None,
        stopped_early: false,
        last_eval: None,
    };
    let mut obs = env.reset(reset_rng.next_u64());
    let mut ep_reward = 0.0;
    let mut ep_best_lap: Option<f64> = None;
    let (mut loss_sum, mut loss_n) = ([0.0; 2], 0u32);

    for it in 1..=cfg.iterations {
        let a = if it <= agent.cfg.warmup {
            agent.random_action()
        } else {
            agent.explore(&obs)
        };
        let step = env.step(a)?;
        buffer.push(&obs, a, step.reward, &step.observation, step.terminal);
        ep_reward += step.reward;
        if step.info.friction_violation {
            summary.violations += 1;
        }
        if let Some(t) = step.info.lap_time {
            ep_best_lap = Some(ep_best_lap.map_or(t, |b| b.min(t)));
        }
        obs = step.observation;

        if it > agent.cfg.warmup && buffer.len() >= agent.cfg.batch_size {
            let batch = buffer.sample(agent.cfg.batch_size, &mut sample_rng);
            match agent.train_step(&batch) {
                Ok(l) => {
                    loss_sum[0] += l.critic1;
                    loss_sum[1] += l.critic2;
                    loss_n += 1;
                }
                Err(e) => {
                    outputs.flush()?;
                    outputs.checkpoint(&agent, it, "abort.td3c")?;
                    log::error!("training aborted at step {it}: {e}");
                    return Err(e);
                }
            }
        }
        summary.iterations = it;

        let mut flow = ControlFlow::Continue(());
        if step.terminal || step.truncated {
            summary.episodes += 1;
            if step.info.friction_violation && step.terminal && !step.info.off_track && !step.info.wrong_way {
                summary.violation_terminations += 1;
            }
            let losses = if loss_n > 0 {
                [loss_sum[0] / loss_n as f64, loss_sum[1] / loss_n as f64]
            } else {
                [f64::NAN; 2]
            };
            let fmt_loss = |l: f64| if l.is_nan() { String::new() } else { l.to_string() };
            let success = env.laps() >= 2 && !step.terminal && env.violations() == 0;
            let _ = writeln!(
                outputs.metrics,
                "{it},{},{ep_reward},{},{},{},{},{}",
                summary.episodes,
                fmt_loss(losses[0]),
                fmt_loss(losses[1]),
                summary.violations,
                opt(ep_best_lap),
                success as u8
            );
            if let Some(t) = ep_best_lap {
                summary.best_lap = Some(summary.best_lap.map_or(t, |b: f64| b.min(t)));
            }
            flow = on_progress(&Progress {
                iteration: it,
                episode: summary.episodes,
                episode_reward: ep_reward,
                violations: summary.violations,
                eval: None,
            });
            obs = env.reset(reset_rng.next_u64());
            ep_reward = 0.0;
            ep_best_lap = None;
            loss_sum = [0.0; 2];
            loss_n = 0;
        }

        if cfg.eval_interval > 0 && it % cfg.eval_interval == 0 && cfg.eval_episodes > 0 {
            let ecfg = EvalConfig {
                episodes: cfg.eval_episodes,
                seed: eval_seed,
                start_speed: cfg.eval_start_speed,
            };
            let report = evaluate(&agent, &mut eval_env, &ecfg)?;
            let _ = writeln!(
                outputs.evals,
                "{it},{},{},{},{}",
                report.success_rate,
                report.mean_reward,
                opt(report.best_flying_lap),
                report.violations
            );
            let f = on_progress(&Progress {
                iteration: it,
                episode: summary.episodes,
                episode_reward: ep_reward,
                violations: summary.violations,
                eval: Some(report.clone()),
            });
            summary.last_eval = Some(report);
            if f.is_break() {
                flow = f;
            }
            outputs.flush()?;
        }
        if cfg.checkpoint_interval > 0 && it % cfg.checkpoint_interval == 0 {
            outputs.checkpoint(&agent, it, &format!("checkpoints/iter_{it:09}.td3c"))?;
            outputs.flush()?;
        }

        let violation_stop = cfg.stop_after_violations.is_some_and(|n| summary.violations >= n);
        if flow.is_break() || violation_stop {
            summary.stopped_early = it < cfg.iterations;
            break;
        }
    }

    summary.updates = agent.updates;
    outputs.flush()?;
    outputs.checkpoint(&agent, summary.iterations, "final.td3c")?;
    Ok((agent, summary))
}
