//! Binary checkpoints of a TD3 agent.
//!
//! Layout, little-endian: magic `TD3C`, `u32` version, the configuration, actor and
//! critic layer sizes, the parameters of the six networks as `f64` (actor, actor target,
//! critic 1, critic 2, critic 1 target, critic 2 target), the Adam moments of the actor
//! and both critics, the iteration and update counters, and the agent's RNG state.

use std::path::Path;

use amrace_core::fsutil::write_atomic;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adam::{Adam, AdamConfig};
use crate::agent::{Td3Agent, Td3Config};
use crate::mlp::{Float, Layer, Mlp, Output};

pub const MAGIC: &[u8; 4] = b"TD3C";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(String),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("{0} trailing bytes after checkpoint")]
    Trailing(usize),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint expects {expected} observation dims, environment has {found}")]
    Dims { expected: usize, found: usize },
}

/// A saved agent plus the training iteration it was taken at.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub agent: Td3Agent<f64>,
    pub iteration: u64,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend(v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend(v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend(v.to_le_bytes());
    }
    fn dims(&mut self, dims: &[usize]) {
        self.u32(dims.len() as u32);
        for &d in dims {
            self.u64(d as u64);
        }
    }
    fn layers(&mut self, layers: &[Layer<f64>]) {
        for l in layers {
            for &v in l.w.iter().chain(l.b.iter()) {
                self.f64(v);
            }
        }
    }
    fn adam(&mut self, a: &Adam<f64>) {
        self.u64(a.t);
        self.layers(&a.m);
        self.layers(&a.v);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        let end = self.pos + N;
        let chunk = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(chunk.try_into().unwrap())
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn dims(&mut self) -> Result<Vec<usize>, CheckpointError> {
        let n = self.u32()? as usize;
        if !(2..=64).contains(&n) {
            return Err(CheckpointError::Malformed(format!("{n} layer sizes")));
        }
        let dims = (0..n).map(|_| self.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if dims.iter().any(|&d| d == 0 || d > 1 << 20) {
            return Err(CheckpointError::Malformed(format!("layer sizes {dims:?}")));
        }
        Ok(dims)
    }
    fn layers(&mut self, layers: &mut [Layer<f64>]) -> Result<(), CheckpointError> {
        for l in layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = self.f64()?;
            }
        }
        Ok(())
    }
    fn net(&mut self, dims: &[usize], output: Output) -> Result<Mlp<f64>, CheckpointError> {
        let mut net = Mlp::zeros(dims, output);
        self.layers(net.layers_mut())?;
        Ok(net)
    }
    fn adam(&mut self, net: &Mlp<f64>, cfg: AdamConfig) -> Result<Adam<f64>, CheckpointError> {
        let mut a = Adam::new(net, cfg);
        a.t = self.u64()?;
        self.layers(&mut a.m)?;
        self.layers(&mut a.v)?;
        Ok(a)
    }
}

fn config_fields(c: &Td3Config) -> [f64; 12] {
    [
        c.gamma,
        c.actor_lr,
        c.critic_lr,
        c.tau,
        c.batch_size as f64,
        c.buffer_size as f64,
        c.explore_noise,
        c.target_noise,
        c.noise_clip,
        c.policy_delay as f64,
        c.warmup as f64,
        c.actor_last_scale,
    ]
}

impl Checkpoint {
    pub fn from_agent<T: Float>(agent: &Td3Agent<T>, iteration: u64) -> Self {
        Checkpoint {
            agent: Td3Agent {
                cfg: agent.cfg.clone(),
                actor: agent.actor.cast(),
                actor_target: agent.actor_target.cast(),
                critic1: agent.critic1.cast(),
                critic2: agent.critic2.cast(),
                critic1_target: agent.critic1_target.cast(),
                critic2_target: agent.critic2_target.cast(),
                actor_opt: agent.actor_opt.cast(),
                critic1_opt: agent.critic1_opt.cast(),
                critic2_opt: agent.critic2_opt.cast(),
                updates: agent.updates,
                rng: agent.rng.clone(),
            },
            iteration,
        }
    }

    /// The agent in element type `T`.
    pub fn to_agent<T: Float>(&self) -> Td3Agent<T> {
        let a = &self.agent;
        Td3Agent {
            cfg: a.cfg.clone(),
            actor: a.actor.cast(),
            actor_target: a.actor_target.cast(),
            critic1: a.critic1.cast(),
            critic2: a.critic2.cast(),
            critic1_target: a.critic1_target.cast(),
            critic2_target: a.critic2_target.cast(),
            actor_opt: a.actor_opt.cast(),
            critic1_opt: a.critic1_opt.cast(),
            critic2_opt: a.critic2_opt.cast(),
            updates: a.updates,
            rng: a.rng.clone(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.agent.actor.input_dim()
    }

    /// Fails unless the policy accepts observations of length `obs_dim`.
    pub fn check_obs_dim(&self, obs_dim: usize) -> Result<(), CheckpointError> {
        if self.obs_dim() != obs_dim {
            return Err(CheckpointError::Dims {
                expected: self.obs_dim(),
                found: obs_dim,
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let a = &self.agent;
        let mut w = Writer(Vec::new());
        w.0.extend(MAGIC);
        w.u32(FORMAT_VERSION);
        for v in config_fields(&a.cfg) {
            w.f64(v);
        }
        w.dims(&a.actor.dims());
        w.dims(&a.critic1.dims());
        for net in [
            &a.actor,
            &a.actor_target,
            &a.critic1,
            &a.critic2,
            &a.critic1_target,
            &a.critic2_target,
        ] {
            w.layers(net.layers());
        }
        w.adam(&a.actor_opt);
        w.adam(&a.critic1_opt);
        w.adam(&a.critic2_opt);
        w.u64(self.iteration);
        w.u64(a.updates);
        w.0.extend(a.rng.get_seed());
        w.u64(a.rng.get_stream());
        w.0.extend(a.rng.get_word_pos().to_le_bytes());
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if &r.take::<4>()? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let mut f = [0.0; 12];
        for v in &mut f {
            *v = r.f64()?;
        }
        let actor_dims = r.dims()?;
        let critic_dims = r.dims()?;
        let hidden = actor_dims[1..actor_dims.len() - 1].to_vec();
        let (obs, out) = (actor_dims[0], *actor_dims.last().unwrap());
        if critic_dims != [&[obs + out][..], &hidden, &[1]].concat() {
            return Err(CheckpointError::Malformed(format!(
                "critic sizes {critic_dims:?} do not match actor sizes {actor_dims:?}"
            )));
        }
        let cfg = Td3Config {
            gamma: f[0],
            actor_lr: f[1],
            critic_lr: f[2],
            tau: f[3],
            batch_size: f[4] as usize,
            buffer_size: f[5] as usize,
            explore_noise: f[6],
            target_noise: f[7],
            noise_clip: f[8],
            policy_delay: f[9] as u64,
            warmup: f[10] as u64,
            hidden,
            actor_last_scale: f[11],
        };
        cfg.validate().map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let actor = r.net(&actor_dims, Output::Tanh)?;
        let actor_target = r.net(&actor_dims, Output::Tanh)?;
        let critic1 = r.net(&critic_dims, Output::Linear)?;
        let critic2 = r.net(&critic_dims, Output::Linear)?;
        let critic1_target = r.net(&critic_dims, Output::Linear)?;
        let critic2_target = r.net(&critic_dims, Output::Linear)?;
        let adam = |lr| AdamConfig {
            lr,
            ..Default::default()
        };
        let actor_opt = r.adam(&actor, adam(cfg.actor_lr))?;
        let critic1_opt = r.adam(&critic1, adam(cfg.critic_lr))?;
        let critic2_opt = r.adam(&critic2, adam(cfg.critic_lr))?;
        let iteration = r.u64()?;
        let updates = r.u64()?;
        let seed: [u8; 32] = r.take()?;
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take()?);
        if r.pos != bytes.len() {
            return Err(CheckpointError::Trailing(bytes.len() - r.pos));
        }
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        Ok(Checkpoint {
            agent: Td3Agent {
                cfg,
                actor,
                actor_target,
                critic1,
                critic2,
                critic1_target,
                critic2_target,
                actor_opt,
                critic1_opt,
                critic2_opt,
                updates,
                rng,
            },
            iteration,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        write_atomic(path, &self.to_bytes()).map_err(|e| CheckpointError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|e| CheckpointError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    impl Td3Agent<f64> {
        fn cast_like(&self) -> Td3Agent<f32> {
            Checkpoint::from_agent(self, 0).to_agent()
        }
    }

    fn small() -> Td3Agent<f64> {
        let cfg = Td3Config {
            hidden: vec![6, 5],
            batch_size: 4,
            buffer_size: 8,
            ..Default::default()
        };
        Td3Agent::new(7, cfg, 3).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let mut agent = small();
        let _: f64 = agent.rng.gen();
        agent.actor_opt.t = 5;
        agent.critic2_opt.m[1].b[0] = 0.25;
        let c = Checkpoint::from_agent(&agent, 42);
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back.iteration, 42);
        assert_eq!(back.agent.cfg, agent.cfg);
        assert_eq!(back.agent.actor, agent.actor);
        assert_eq!(back.agent.critic2_target, agent.critic2_target);
        assert_eq!(back.agent.actor_opt, agent.actor_opt);
        assert_eq!(back.agent.critic2_opt, agent.critic2_opt);
        assert_eq!(back.agent.rng, agent.rng);
        assert_eq!(back.to_bytes(), c.to_bytes());
    }

    #[test]
    fn rejects_damaged_files() {
        let bytes = Checkpoint::from_agent(&small(), 0).to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::BadMagic)));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::Version(9))));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 1]),
            Err(CheckpointError::Truncated)
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Checkpoint::from_bytes(&long), Err(CheckpointError::Trailing(1))));
    }

    #[test]
    fn dims_check() {
        let c = Checkpoint::from_agent(&small(), 0);
        assert!(c.check_obs_dim(7).is_ok());
        assert!(matches!(
            c.check_obs_dim(29),
            Err(CheckpointError::Dims { expected: 7, found: 29 })
        ));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.td3c");
        let c = Checkpoint::from_agent(&small(), 1);
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap().to_bytes(), c.to_bytes());
    }

    #[test]
    fn single_precision_agents_survive_the_round_trip() {
        let agent: Td3Agent<f32> = small().cast_like();
        let back: Td3Agent<f32> = Checkpoint::from_bytes(&Checkpoint::from_agent(&agent, 0).to_bytes())
            .unwrap()
            .to_agent();
        assert_eq!(back.actor, agent.actor);
        assert_eq!(back.critic1_opt, agent.critic1_opt);
    }
}
