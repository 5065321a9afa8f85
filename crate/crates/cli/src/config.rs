use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use amrace_core::env::ConstraintMode;
use amrace_core::kv::KeyValues;
use amrace_core::mapping::{BoundaryTable, GridSpec, HashPolicy};
use amrace_core::track::{Builtin, Track};
use amrace_core::vehicle::VehicleParams;

use crate::args::Common;
use crate::CliError;

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_TRACK: &str = "oval-short";

const CONFIG_KEYS: [&str; 14] = [
    "vehicle",
    "track",
    "table",
    "seed",
    "out",
    "mode",
    "mu_max",
    "grid",
    "iters",
    "eval_interval",
    "eval_episodes",
    "checkpoint_interval",
    "episodes",
    "stop_after_violations",
];

/// Resolved shared settings: flags first, then the config file, then defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub file: KeyValues,
    pub vehicle: Option<PathBuf>,
    pub track: String,
    pub table: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub mode: ConstraintMode,
    pub mu_max: Option<f64>,
    pub grid: Option<String>,
    pub iters: u64,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| CliError::Validation(format!("config `{key}`: {e}")))
}

impl RunConfig {
    pub fn resolve(c: &Common) -> Result<Self, CliError> {
        let file = match &c.config {
            Some(p) => KeyValues::read(p).map_err(|e| CliError::Validation(e.to_string()))?,
            None => KeyValues::default(),
        };
        file.ensure_known(&CONFIG_KEYS)
            .map_err(|e| CliError::Validation(format!("config file: {e}")))?;
        let cfg = RunConfig {
            vehicle: c.vehicle.clone().or_else(|| file.get("vehicle").map(PathBuf::from)),
            track: c
                .track
                .clone()
                .or_else(|| file.get("track").map(String::from))
                .unwrap_or_else(|| DEFAULT_TRACK.into()),
            table: c.table.clone().or_else(|| file.get("table").map(PathBuf::from)),
            seed: match c.seed {
                Some(s) => s,
                None => file.get("seed").map(|v| parse("seed", v)).transpose()?.unwrap_or(DEFAULT_SEED),
            },
            out: c
                .out
                .clone()
                .or_else(|| file.get("out").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out")),
            mode: match c.mode.as_deref().or(file.get("mode")) {
                Some(m) => parse("mode", m)?,
                None => ConstraintMode::Am,
            },
            mu_max: match c.mu_max {
                Some(m) => Some(m),
                None => file.get("mu_max").map(|v| parse("mu_max", v)).transpose()?,
            },
            grid: c.grid.clone().or_else(|| file.get("grid").map(String::from)),
            iters: match c.iters {
                Some(n) => n,
                None => file.get("iters").map(|v| parse("iters", v)).transpose()?.unwrap_or(300_000),
            },
            file,
        };
        Ok(cfg)
    }

    /// A subcommand-specific setting from the flag or the config file.
    pub fn extra<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.file.get(key).map(|v| parse(key, v)).transpose()?.unwrap_or(default)),
        }
    }

    pub fn vehicle_params(&self) -> Result<VehicleParams, CliError> {
        let p = match &self.vehicle {
            Some(path) => VehicleParams::load(path).map_err(|e| CliError::Validation(e.to_string()))?,
            None => VehicleParams::default(),
        };
        let p = match self.mu_max {
            Some(mu) => p.with_mu_max(mu),
            None => p,
        };
        p.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(p)
    }

    pub fn track(&self) -> Result<Arc<Track>, CliError> {
        let t = match Builtin::from_name(&self.track) {
            Some(b) => Track::from_builtin(b),
            None => Track::load(Path::new(&self.track)).map_err(|e| CliError::Validation(format!("track: {e}")))?,
        };
        Ok(Arc::new(t))
    }

    pub fn grid(&self, p: &VehicleParams) -> Result<GridSpec, CliError> {
        let g = match &self.grid {
            Some(text) => GridSpec::parse_counts(text, p).map_err(|e| CliError::Validation(e.to_string()))?,
            None => GridSpec::desk(p),
        };
        g.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(g)
    }

    pub fn table_path(&self) -> PathBuf {
        self.table.clone().unwrap_or_else(|| self.out.join("table.ambt"))
    }

    /// Loads the table named by `--table`; required in action-mapping mode.
    pub fn load_table(&self, p: &VehicleParams) -> Result<Option<BoundaryTable>, CliError> {
        let path = match (&self.table, self.mode) {
            (Some(path), _) => path,
            (None, ConstraintMode::Am) => {
                return Err(CliError::Validation("--table is required in am mode".into()));
            }
            (None, _) => return Ok(None),
        };
        let t = BoundaryTable::load(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        t.verify_params(p, HashPolicy::Warn)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(Some(t))
    }

    pub fn create_out(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::Validation(format!("{}: {e}", self.out.display())))
    }
}
