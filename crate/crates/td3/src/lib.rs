//! TD3 training of race-driving policies.

pub mod adam;
pub mod agent;
pub mod checkpoint;
pub mod eval;
pub mod mlp;
pub mod replay;
pub mod train;

pub use agent::{Td3Agent, Td3Config, TrainError};
pub use checkpoint::Checkpoint;
pub use eval::{evaluate, EvalConfig, EvalReport, Policy};
pub use mlp::{Float, Mlp, Output};
pub use replay::{Batch, ReplayBuffer};
pub use train::{train, TrainConfig, TrainSummary};
