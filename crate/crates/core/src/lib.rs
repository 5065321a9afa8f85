//! Race-car simulation with a friction-constrained action mapping.
//!
//! - [`vehicle`]: single-track dynamics, tire forces and the friction check.
//! - [`track`]: centerline polylines, projection and forward observations.
//! - [`mapping`]: the sampled boundary table and the polar clipping action map.
//! - [`env`]: the race-driving episode built from the pieces above.

pub mod angle;
pub mod env;
pub mod error;
pub mod fsutil;
pub mod kv;
pub mod mapping;
pub mod track;
pub mod vehicle;

pub use error::{ConfigError, DynamicsError};
