use std::ops::ControlFlow;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use amrace_core::env::{EnvConfig, RaceEnv, TrajectoryRow};
use amrace_core::fsutil::write_atomic;
use amrace_core::mapping::{build_table, ActionMapper, TableStats};
use amrace_core::vehicle::{CheckHorizon, VehicleParams};
use amrace_td3::eval::{evaluate, EvalConfig, EvalReport, Policy};
use amrace_td3::train::{train, TrainConfig, TrainSummary};
use amrace_td3::{Checkpoint, Td3Agent, Td3Config};
use serde::Serialize;

use crate::args::{BuildTableArgs, EvaluateArgs, RolloutArgs, SliceArgs, TrainArgs};
use crate::config::RunConfig;
use crate::CliError;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String, CliError> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)? + "\n";
    write_atomic(path, text.as_bytes()).map_err(runtime)?;
    Ok(text)
}

fn make_env(cfg: &RunConfig, p: &VehicleParams, conservative: bool, max_steps: Option<usize>) -> Result<RaceEnv, CliError> {
    let track = cfg.track()?;
    let mapper = cfg
        .load_table(p)?
        .map(|t| Arc::new(ActionMapper::new(t, p, CheckHorizon::default(), conservative)));
    let mut env_cfg = EnvConfig {
        mode: cfg.mode,
        ..Default::default()
    };
    if let Some(n) = max_steps {
        env_cfg.max_steps = n;
    }
    RaceEnv::new(*p, track, mapper, env_cfg).map_err(|e| CliError::Validation(e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct BuildReport {
    pub table: String,
    pub wall_time_s: f64,
    pub grid: [usize; 3],
    pub v_range: (f64, f64),
    pub delta_range: (f64, f64),
    pub mu_max: f64,
    pub stats: TableStats,
}

pub fn build_table_cmd(args: &BuildTableArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&args.common)?;
    let p = cfg.vehicle_params()?;
    let grid = cfg.grid(&p)?;
    cfg.create_out()?;
    let path = cfg.table_path();
    let start = Instant::now();
    let table = build_table(&p, &grid, &CheckHorizon::default()).map_err(runtime)?;
    let wall = start.elapsed().as_secs_f64();
    table.save(&path).map_err(runtime)?;
    let report = BuildReport {
        table: path.display().to_string(),
        wall_time_s: wall,
        grid: [grid.n_v, grid.n_delta, grid.n_theta],
        v_range: grid.v_range,
        delta_range: grid.delta_range,
        mu_max: table.mu_max(),
        stats: table.stats(),
    };
    print!("{}", write_json(&cfg.out.join("build_report.json"), &report)?);
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct TrainReport {
    pub seed: u64,
    pub mode: String,
    pub track: String,
    pub wall_time_s: f64,
    pub summary: TrainSummary,
}

pub fn train_cmd(args: &TrainArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&args.common)?;
    let p = cfg.vehicle_params()?;
    let mut env = make_env(&cfg, &p, !args.plain_lookup, None)?;
    cfg.create_out()?;
    let defaults = TrainConfig::default();
    let tc = TrainConfig {
        iterations: cfg.iters,
        seed: cfg.seed,
        eval_interval: cfg.extra(args.eval_interval, "eval_interval", defaults.eval_interval)?,
        eval_episodes: cfg.extra(args.eval_episodes, "eval_episodes", defaults.eval_episodes)?,
        checkpoint_interval: cfg.extra(args.checkpoint_interval, "checkpoint_interval", defaults.checkpoint_interval)?,
        stop_after_violations: Some(cfg.extra(args.stop_after_violations, "stop_after_violations", 0)?).filter(|&n| n > 0),
        ..defaults
    };
    let start = Instant::now();
    let (_, summary) = train::<f32>(&mut env, Td3Config::default(), &tc, Some(&cfg.out), |pr| {
        if let Some(r) = &pr.eval {
            eprintln!(
                "iter {} episodes {} violations {} eval success {:.2} reward {:.1} best flying lap {}",
                pr.iteration,
                pr.episode,
                pr.violations,
                r.success_rate,
                r.mean_reward,
                r.best_flying_lap.map_or("-".into(), |t| format!("{t:.2} s"))
            );
        }
        ControlFlow::Continue(())
    })
    .map_err(|e| match e {
        amrace_td3::TrainError::Config(m) => CliError::Validation(m),
        other => runtime(other),
    })?;
    let report = TrainReport {
        seed: cfg.seed,
        mode: cfg.mode.to_string(),
        track: cfg.track.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        summary,
    };
    print!("{}", write_json(&cfg.out.join("train_report.json"), &report)?);
    Ok(())
}

fn load_policy(path: &Path, obs_dim: usize) -> Result<Td3Agent<f64>, CliError> {
    let ck = Checkpoint::load(path).map_err(|e| CliError::Validation(e.to_string()))?;
    ck.check_obs_dim(obs_dim).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(ck.agent)
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&args.common)?;
    let p = cfg.vehicle_params()?;
    let mut env = make_env(&cfg, &p, !args.plain_lookup, None)?;
    let agent = load_policy(&args.checkpoint, env.observation_dim())?;
    cfg.create_out()?;
    let ecfg = EvalConfig {
        episodes: cfg.extra(args.episodes, "episodes", 20)?,
        seed: cfg.seed,
        ..Default::default()
    };
    let report: EvalReport = evaluate(&agent, &mut env, &ecfg).map_err(runtime)?;
    print!("{}", write_json(&cfg.out.join("eval_report.json"), &report)?);
    Ok(())
}

struct Hold([f64; 2]);

impl Policy for Hold {
    fn act(&self, _obs: &[f64]) -> [f64; 2] {
        self.0
    }
}

fn parse_pair(text: &str) -> Result<[f64; 2], CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || CliError::Usage(format!("expected `ux,uy`, got `{text}`"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    Ok([a, b])
}

pub fn rollout_cmd(args: &RolloutArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&args.common)?;
    let p = cfg.vehicle_params()?;
    let mut env = make_env(&cfg, &p, !args.plain_lookup, args.max_steps)?;
    let policy: Box<dyn Policy> = match (&args.checkpoint, &args.hold) {
        (Some(path), None) => Box::new(load_policy(path, env.observation_dim())?),
        (None, Some(h)) => Box::new(Hold(parse_pair(h)?)),
        (None, None) => Box::new(Hold([0.0, 0.0])),
        (Some(_), Some(_)) => return Err(CliError::Usage("--checkpoint and --hold are exclusive".into())),
    };
    if !(args.speed.is_finite() && args.speed >= 0.0) {
        return Err(CliError::Validation(format!("start speed {} must be non-negative", args.speed)));
    }
    cfg.create_out()?;
    let s0 = args.start_s.unwrap_or(env.track().finish_s());
    let mut obs = env.reset_at(s0, args.speed);
    let mut csv = TrajectoryRow::header() + "\n";
    csv.push_str(&TrajectoryRow::initial(env.state(), env.pose()).to_csv());
    csv.push('\n');
    loop {
        let a = policy.act(&obs);
        let step = env.step(a).map_err(runtime)?;
        let row = TrajectoryRow::after_step(env.time(), env.state(), env.pose(), a, &step);
        csv.push_str(&row.to_csv());
        csv.push('\n');
        let done = step.done();
        obs = step.observation;
        if done {
            break;
        }
    }
    let path = cfg.out.join("trajectory.csv");
    write_atomic(&path, csv.as_bytes()).map_err(runtime)?;
    #[derive(Serialize)]
    struct RolloutReport {
        trajectory: String,
        steps: usize,
        laps: u32,
        lap_times: Vec<f64>,
        violations: u64,
    }
    let report = RolloutReport {
        trajectory: path.display().to_string(),
        steps: env.steps(),
        laps: env.laps(),
        lap_times: env.lap_times().to_vec(),
        violations: env.violations(),
    };
    print!("{}", serde_json::to_string_pretty(&report).map_err(runtime)? + "\n");
    Ok(())
}

pub fn export_slice_cmd(args: &SliceArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&args.common)?;
    let path = cfg
        .table
        .clone()
        .ok_or_else(|| CliError::Validation("--table is required".into()))?;
    let table = amrace_core::mapping::BoundaryTable::load(&path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let (lo, hi) = table.grid().v_range;
    let mut v = args.speed;
    if !v.is_finite() {
        return Err(CliError::Validation("speed must be finite".into()));
    }
    if v < lo || v > hi {
        let c = v.clamp(lo, hi);
        log::warn!("speed {v} m/s outside the table range [{lo}, {hi}], using {c}");
        v = c;
    }
    let n = args.delta_steps;
    let (a, b) = (args.delta_from.to_radians(), args.delta_to.to_radians());
    let deltas: Vec<f64> = if n == 0 || a > b {
        Vec::new()
    } else if n == 1 {
        vec![a]
    } else {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    };
    cfg.create_out()?;
    let out = cfg.out.join("boundary_slice.csv");
    write_atomic(&out, table.slice_csv(v, &deltas).as_bytes()).map_err(runtime)?;
    println!("{}", out.display());
    Ok(())
}
