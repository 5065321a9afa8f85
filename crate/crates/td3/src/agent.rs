use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adam::{Adam, AdamConfig};
use crate::mlp::{Float, Mlp, Output};
use crate::replay::{Batch, ACTION_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Td3Config {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Soft target update rate.
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_size: usize,
    /// Standard deviation of the exploration noise.
    pub explore_noise: f64,
    /// Standard deviation of the target policy smoothing noise.
    pub target_noise: f64,
    /// Clip of the target policy smoothing noise.
    pub noise_clip: f64,
    /// Critic updates per actor and target update.
    pub policy_delay: u64,
    /// Random-action steps before learning starts.
    pub warmup: u64,
    pub hidden: Vec<usize>,
    /// Scale of the actor's initial output layer.
    pub actor_last_scale: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            gamma: 0.99,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            tau: 0.005,
            batch_size: 256,
            buffer_size: 1_000_000,
            explore_noise: 0.1,
            target_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            warmup: 5000,
            hidden: vec![256, 256],
            actor_last_scale: 0.01,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("tau", self.tau),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.tau > 1.0 {
            return bad(format!("tau {} above 1", self.tau));
        }
        for (name, v) in [
            ("explore_noise", self.explore_noise),
            ("target_noise", self.target_noise),
            ("noise_clip", self.noise_clip),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.policy_delay == 0 {
            return bad("policy_delay must be at least 1".into());
        }
        if self.batch_size == 0 || self.buffer_size < self.batch_size {
            return bad(format!(
                "batch size {} must be positive and fit the buffer of {}",
                self.batch_size, self.buffer_size
            ));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        Ok(())
    }

    fn dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut d = vec![input];
        d.extend(&self.hidden);
        d.push(output);
        d
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite {what} at update {update}")]
    NonFinite { what: &'static str, update: u64 },
    #[error(transparent)]
    Env(#[from] amrace_core::env::EnvError),
    #[error("{0}")]
    Io(String),
}

/// Actor, twin critics, their target copies and optimizer state.
#[derive(Debug, Clone)]
pub struct Td3Agent<T> {
    pub cfg: Td3Config,
    pub actor: Mlp<T>,
    pub actor_target: Mlp<T>,
    pub critic1: Mlp<T>,
    pub critic2: Mlp<T>,
    pub critic1_target: Mlp<T>,
    pub critic2_target: Mlp<T>,
    pub actor_opt: Adam<T>,
    pub critic1_opt: Adam<T>,
    pub critic2_opt: Adam<T>,
    /// Critic updates performed.
    pub updates: u64,
    pub rng: ChaCha8Rng,
}

/// Losses of one critic update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CriticLosses {
    pub critic1: f64,
    pub critic2: f64,
}

/// `[obs | action]` rows.
pub fn critic_input<'a, T: Float>(obs: ArrayView2<'a, T>, actions: ArrayView2<'a, T>) -> Array2<T> {
    concatenate(Axis(1), &[obs, actions]).expect("batch rows agree")
}

/// Bootstrapped targets `r + gamma (1 - done) min_j Q'_j(s', clip(pi'(s') + eps))`.
pub fn compute_targets<T: Float, R: Rng>(
    actor_target: &Mlp<T>,
    critic1_target: &Mlp<T>,
    critic2_target: &Mlp<T>,
    batch: &Batch<T>,
    cfg: &Td3Config,
    rng: &mut R,
) -> Array1<T> {
    let mut next_a = actor_target.forward(batch.next_obs.view());
    if cfg.target_noise > 0.0 {
        let normal = Normal::new(0.0, cfg.target_noise).expect("noise scale is finite");
        for a in next_a.iter_mut() {
            let eps = normal.sample(rng).clamp(-cfg.noise_clip, cfg.noise_clip);
            *a = T::of((a.f64() + eps).clamp(-1.0, 1.0));
        }
    }
    let x = critic_input(batch.next_obs.view(), next_a.view());
    let q1 = critic1_target.forward(x.view());
    let q2 = critic2_target.forward(x.view());
    let gamma = T::of(cfg.gamma);
    Array1::from_shape_fn(batch.len(), |i| {
        let q = q1[[i, 0]].min(q2[[i, 0]]);
        batch.rewards[i] + gamma * (T::one() - batch.dones[i]) * q
    })
}

/// Mean squared error of `critic` on the batch and its parameter gradients.
pub fn critic_loss_grad<T: Float>(critic: &Mlp<T>, x: &Array2<T>, targets: &Array1<T>) -> (f64, Vec<crate::mlp::Layer<T>>) {
    let cache = critic.forward_cached(x.view());
    let n = targets.len();
    let q = cache.output();
    let scale = T::of(2.0 / n as f64);
    let mut loss = 0.0;
    let d = Array2::from_shape_fn((n, 1), |(i, _)| {
        let e = q[[i, 0]] - targets[i];
        loss += e.f64() * e.f64();
        scale * e
    });
    let (grads, _) = critic.backward(&cache, &d, true, false);
    (loss / n as f64, grads.unwrap())
}

/// Mean of `Q1(s, pi(s))` over the batch and the gradient of its negative w.r.t. the
/// actor parameters (descending it ascends the critic).
pub fn actor_objective_grad<T: Float>(actor: &Mlp<T>, critic: &Mlp<T>, obs: &Array2<T>) -> (f64, Vec<crate::mlp::Layer<T>>) {
    let n = obs.nrows();
    let a_cache = actor.forward_cached(obs.view());
    let x = critic_input(obs.view(), a_cache.output().view());
    let c_cache = critic.forward_cached(x.view());
    let mean_q = c_cache.output().iter().map(|v| v.f64()).sum::<f64>() / n as f64;
    let d_q = Array2::from_elem((n, 1), T::of(-1.0 / n as f64));
    let (_, d_x) = critic.backward(&c_cache, &d_q, false, true);
    let d_x = d_x.unwrap();
    let d_a = d_x.slice(s![.., obs.ncols()..]).to_owned();
    let (grads, _) = actor.backward(&a_cache, &d_a, true, false);
    (mean_q, grads.unwrap())
}

impl<T: Float> Td3Agent<T> {
    pub fn new(obs_dim: usize, cfg: Td3Config, seed: u64) -> Result<Self, TrainError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Mlp::init(&cfg.dims(obs_dim, ACTION_DIM), Output::Tanh, cfg.actor_last_scale, &mut rng);
        let cdims = cfg.dims(obs_dim + ACTION_DIM, 1);
        let critic1 = Mlp::init(&cdims, Output::Linear, 1.0, &mut rng);
        let critic2 = Mlp::init(&cdims, Output::Linear, 1.0, &mut rng);
        let actor_adam = AdamConfig {
            lr: cfg.actor_lr,
            ..Default::default()
        };
        let critic_adam = AdamConfig {
            lr: cfg.critic_lr,
            ..Default::default()
        };
        Ok(Td3Agent {
            actor_opt: Adam::new(&actor, actor_adam),
            critic1_opt: Adam::new(&critic1, critic_adam),
            critic2_opt: Adam::new(&critic2, critic_adam),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            cfg,
            updates: 0,
            rng,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    /// Deterministic action for one observation.
    pub fn act(&self, obs: &[f64]) -> [f64; 2] {
        let x = Array2::from_shape_fn((1, obs.len()), |(_, j)| T::of(obs[j]));
        let y = self.actor.forward(x.view());
        [y[[0, 0]].f64(), y[[0, 1]].f64()]
    }

    /// Policy action plus Gaussian exploration noise, clamped to the action box.
    pub fn explore(&mut self, obs: &[f64]) -> [f64; 2] {
        let a = self.act(obs);
        let normal = Normal::new(0.0, self.cfg.explore_noise.max(0.0)).expect("noise scale is finite");
        let mut out = [0.0; 2];
        for (o, v) in out.iter_mut().zip(a) {
            *o = (v + normal.sample(&mut self.rng)).clamp(-1.0, 1.0);
        }
        out
    }

    /// Uniform random action for the warm-up phase.
    pub fn random_action(&mut self) -> [f64; 2] {
        [self.rng.gen_range(-1.0..=1.0), self.rng.gen_range(-1.0..=1.0)]
    }

    /// One gradient step for each critic towards the bootstrapped targets.
    pub fn critic_update(&mut self, batch: &Batch<T>) -> Result<CriticLosses, TrainError> {
        let targets = compute_targets(
            &self.actor_target,
            &self.critic1_target,
            &self.critic2_target,
            batch,
            &self.cfg,
            &mut self.rng,
        );
        let x = critic_input(batch.obs.view(), batch.actions.view());
        let (l1, g1) = critic_loss_grad(&self.critic1, &x, &targets);
        let (l2, g2) = critic_loss_grad(&self.critic2, &x, &targets);
        if !(l1.is_finite() && l2.is_finite()) {
            return Err(TrainError::NonFinite {
                what: "critic loss",
                update: self.updates,
            });
        }
        self.critic1_opt.step(&mut self.critic1, &g1);
        self.critic2_opt.step(&mut self.critic2, &g2);
        self.updates += 1;
        Ok(CriticLosses {
            critic1: l1,
            critic2: l2,
        })
    }

    /// One ascent step of the actor on `Q1(s, pi(s))`. Returns the mean Q before the step.
    pub fn actor_update(&mut self, batch: &Batch<T>) -> Result<f64, TrainError> {
        let (q, grads) = actor_objective_grad(&self.actor, &self.critic1, &batch.obs);
        if !grads.iter().all(|g| g.w.iter().chain(g.b.iter()).all(|v| v.is_finite())) {
            return Err(TrainError::NonFinite {
                what: "actor gradient",
                update: self.updates,
            });
        }
        self.actor_opt.step(&mut self.actor, &grads);
        Ok(q)
    }

    pub fn soft_update_targets(&mut self) {
        let tau = self.cfg.tau;
        self.actor_target.soft_update(&self.actor, tau);
        self.critic1_target.soft_update(&self.critic1, tau);
        self.critic2_target.soft_update(&self.critic2, tau);
    }

    /// Critic update every call; actor and target updates every `policy_delay` calls.
    pub fn train_step(&mut self, batch: &Batch<T>) -> Result<CriticLosses, TrainError> {
        let losses = self.critic_update(batch)?;
        if self.updates % self.cfg.policy_delay == 0 {
            self.actor_update(batch)?;
            self.soft_update_targets();
        }
        Ok(losses)
    }

    pub fn is_finite(&self) -> bool {
        [
            &self.actor,
            &self.actor_target,
            &self.critic1,
            &self.critic2,
            &self.critic1_target,
            &self.critic2_target,
        ]
        .iter()
        .all(|n| n.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn const_critic(value: f64, input: usize) -> Mlp<f64> {
        let mut c: Mlp<f64> = Mlp::zeros(&[input, 3, 1], Output::Linear);
        c.layers_mut()[1].b[0] = value;
        c
    }

    fn batch(rewards: &[f64], dones: &[f64]) -> Batch<f64> {
        let n = rewards.len();
        Batch {
            obs: Array2::from_shape_fn((n, 3), |(i, j)| (i + j) as f64 * 0.1),
            actions: Array2::from_shape_fn((n, 2), |(i, j)| (i as f64 - j as f64) * 0.2),
            rewards: Array1::from(rewards.to_vec()),
            next_obs: Array2::from_shape_fn((n, 3), |(i, j)| (i * j) as f64 * 0.1),
            dones: Array1::from(dones.to_vec()),
        }
    }

    #[test]
    fn target_arithmetic() {
        let actor: Mlp<f64> = Mlp::zeros(&[3, 4, 2], Output::Tanh);
        let q = const_critic(5.0, 5);
        let cfg = Td3Config::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = batch(&[1.0, 1.0], &[0.0, 1.0]);
        let y = compute_targets(&actor, &q, &q, &b, &cfg, &mut rng);
        assert!((y[0] - 5.95).abs() < 1e-12);
        assert_eq!(y[1], 1.0);
        let undiscounted = Td3Config {
            gamma: 0.0,
            ..Default::default()
        };
        let y = compute_targets(&actor, &q, &q, &b, &undiscounted, &mut rng);
        assert_eq!(y, array![1.0, 1.0]);
    }

    #[test]
    fn twin_min_and_reward_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let actor: Mlp<f64> = Mlp::init(&[3, 8, 2], Output::Tanh, 1.0, &mut rng);
        let q1: Mlp<f64> = Mlp::init(&[5, 8, 1], Output::Linear, 1.0, &mut rng);
        let q2: Mlp<f64> = Mlp::init(&[5, 8, 1], Output::Linear, 1.0, &mut rng);
        let cfg = Td3Config::default();
        let b = batch(&[0.5, -1.0, 2.0, 0.0], &[0.0, 0.0, 1.0, 0.0]);
        let run = |c1: &Mlp<f64>, c2: &Mlp<f64>, b: &Batch<f64>| {
            compute_targets(&actor, c1, c2, b, &cfg, &mut ChaCha8Rng::seed_from_u64(9))
        };
        let both = run(&q1, &q2, &b);
        let only1 = run(&q1, &q1, &b);
        let only2 = run(&q2, &q2, &b);
        for i in 0..4 {
            assert!(both[i] <= only1[i] && both[i] <= only2[i]);
        }
        let mut shifted = b.clone();
        shifted.rewards += 3.0;
        let y = run(&q1, &q2, &shifted);
        for i in 0..4 {
            assert!((y[i] - both[i] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_critic_has_zero_loss() {
        let c = const_critic(2.0, 5);
        let x = Array2::from_elem((4, 5), 0.3);
        let (loss, grads) = critic_loss_grad(&c, &x, &Array1::from_elem(4, 2.0));
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| g.w.iter().chain(g.b.iter()).all(|&v| v == 0.0)));
    }

    #[test]
    fn single_sample_descent_lowers_the_loss() {
        let mut c: Mlp<f64> = Mlp::zeros(&[1, 1], Output::Linear);
        c.layers_mut()[0].w[[0, 0]] = 0.5;
        let x = array![[2.0]];
        let y = array![3.0];
        let mut adam = Adam::new(&c, AdamConfig::default());
        let (before, g) = critic_loss_grad(&c, &x, &y);
        adam.step(&mut c, &g);
        let (after, _) = critic_loss_grad(&c, &x, &y);
        assert!(after < before);
    }

    #[test]
    fn constant_critic_gives_no_actor_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let actor: Mlp<f64> = Mlp::init(&[3, 6, 2], Output::Tanh, 1.0, &mut rng);
        let critic = const_critic(7.0, 5);
        let obs = Array2::from_elem((5, 3), 0.2);
        let (q, grads) = actor_objective_grad(&actor, &critic, &obs);
        assert_eq!(q, 7.0);
        assert!(grads.iter().all(|g| g.w.iter().chain(g.b.iter()).all(|&v| v == 0.0)));
    }

    #[test]
    fn actor_moves_toward_the_critic_peak() {
        // Q(s, a) = -|a - a*|^2 via a linear layer over squared features is not expressible
        // by a ReLU net, so train the actor against a critic fitted to the bowl instead.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let target = [0.4f64, -0.3];
        let mut critic: Mlp<f64> = Mlp::init(&[3, 64, 64, 1], Output::Linear, 1.0, &mut rng);
        let mut copt = Adam::new(&critic, AdamConfig { lr: 1e-3, ..Default::default() });
        for _ in 0..3000 {
            let x = Array2::from_shape_fn((64, 3), |(_, j)| if j == 0 { 0.5 } else { rng.gen_range(-1.0..1.0) });
            let y = Array1::from_shape_fn(64, |i| {
                -((x[[i, 1]] - target[0]).powi(2) + (x[[i, 2]] - target[1]).powi(2))
            });
            let (_, g) = critic_loss_grad(&critic, &x, &y);
            copt.step(&mut critic, &g);
        }
        let mut actor: Mlp<f64> = Mlp::init(&[1, 16, 2], Output::Tanh, 0.01, &mut rng);
        let mut aopt = Adam::new(&actor, AdamConfig { lr: 1e-2, ..Default::default() });
        let obs = array![[0.5]];
        let dist = |a: &Mlp<f64>| {
            let y = a.forward(obs.view());
            (y[[0, 0]] - target[0]).hypot(y[[0, 1]] - target[1])
        };
        let start = dist(&actor);
        for _ in 0..300 {
            let (_, g) = actor_objective_grad(&actor, &critic, &obs);
            aopt.step(&mut actor, &g);
        }
        assert!(dist(&actor) < 0.2 * start, "{} -> {}", start, dist(&actor));
    }

    #[test]
    fn delayed_policy_updates() {
        let cfg = Td3Config {
            hidden: vec![8],
            batch_size: 4,
            buffer_size: 16,
            ..Default::default()
        };
        let mut agent: Td3Agent<f64> = Td3Agent::new(3, cfg, 1).unwrap();
        let b = batch(&[1.0, 0.0, -1.0, 0.5], &[0.0; 4]);
        let actor0 = agent.actor.clone();
        let target0 = agent.critic1_target.clone();
        agent.train_step(&b).unwrap();
        assert_eq!(agent.actor, actor0);
        assert_eq!(agent.critic1_target, target0);
        agent.train_step(&b).unwrap();
        assert_ne!(agent.actor, actor0);
        assert_ne!(agent.critic1_target, target0);
    }

    #[test]
    fn soft_update_converges_geometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let online: Mlp<f64> = Mlp::init(&[2, 3, 1], Output::Linear, 1.0, &mut rng);
        let mut target: Mlp<f64> = Mlp::init(&[2, 3, 1], Output::Linear, 1.0, &mut rng);
        let gap = |t: &Mlp<f64>| {
            t.params()
                .zip(online.params())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let beta = 0.005;
        let mut prev = gap(&target);
        for _ in 0..50 {
            target.soft_update(&online, beta);
            let g = gap(&target);
            assert!((g - (1.0 - beta) * prev).abs() <= 1e-12 * prev.max(1e-300) + 1e-15);
            prev = g;
        }
    }

    #[test]
    fn config_validation() {
        assert!(Td3Config::default().validate().is_ok());
        for bad in [
            Td3Config { gamma: 1.5, ..Default::default() },
            Td3Config { policy_delay: 0, ..Default::default() },
            Td3Config { tau: 0.0, ..Default::default() },
            Td3Config { batch_size: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
