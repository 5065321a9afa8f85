use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng;

use crate::mlp::Float;

/// Fixed-capacity ring buffer of transitions. Storage grows on demand up to the
/// capacity; once full the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    obs_dim: usize,
    obs: Vec<T>,
    next_obs: Vec<T>,
    actions: Vec<T>,
    rewards: Vec<T>,
    dones: Vec<T>,
    len: usize,
    cursor: usize,
}

/// A sampled minibatch; rows are transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub obs: Array2<T>,
    pub actions: Array2<T>,
    pub rewards: Array1<T>,
    pub next_obs: Array2<T>,
    /// 1 for terminal transitions, 0 otherwise.
    pub dones: Array1<T>,
}

impl<T: Float> Batch<T> {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

pub const ACTION_DIM: usize = 2;

impl<T: Float> ReplayBuffer<T> {
    pub fn new(capacity: usize, obs_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            obs_dim,
            obs: Vec::new(),
            next_obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
            len: 0,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, obs: &[f64], action: [f64; 2], reward: f64, next_obs: &[f64], done: bool) {
        assert_eq!(obs.len(), self.obs_dim);
        assert_eq!(next_obs.len(), self.obs_dim);
        let conv = |v: &f64| T::of(*v);
        let d = if done { T::one() } else { T::zero() };
        if self.len < self.capacity {
            self.obs.extend(obs.iter().map(conv));
            self.next_obs.extend(next_obs.iter().map(conv));
            self.actions.extend(action.iter().map(conv));
            self.rewards.push(T::of(reward));
            self.dones.push(d);
            self.len += 1;
        } else {
            let i = self.cursor;
            let o = i * self.obs_dim;
            for (dst, src) in self.obs[o..o + self.obs_dim].iter_mut().zip(obs) {
                *dst = T::of(*src);
            }
            for (dst, src) in self.next_obs[o..o + self.obs_dim].iter_mut().zip(next_obs) {
                *dst = T::of(*src);
            }
            self.actions[i * ACTION_DIM] = T::of(action[0]);
            self.actions[i * ACTION_DIM + 1] = T::of(action[1]);
            self.rewards[i] = T::of(reward);
            self.dones[i] = d;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Stored reward of slot `i`.
    pub fn reward(&self, i: usize) -> T {
        self.rewards[i]
    }

    /// Slot indices drawn uniformly without replacement.
    pub fn sample_indices<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(n <= self.len, "batch of {n} from {} transitions", self.len);
        index::sample(rng, self.len, n).into_vec()
    }

    pub fn gather(&self, idx: &[usize]) -> Batch<T> {
        let n = idx.len();
        let od = self.obs_dim;
        let rows = |src: &[T], width: usize| {
            Array2::from_shape_fn((n, width), |(r, c)| src[idx[r] * width + c])
        };
        Batch {
            obs: rows(&self.obs, od),
            actions: rows(&self.actions, ACTION_DIM),
            rewards: idx.iter().map(|&i| self.rewards[i]).collect(),
            next_obs: rows(&self.next_obs, od),
            dones: idx.iter().map(|&i| self.dones[i]).collect(),
        }
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Batch<T> {
        self.gather(&self.sample_indices(n, rng))
    }
}
