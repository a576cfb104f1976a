//! Simulation of rapidly-exploring random trees (RRT), nearest neighbour
//! trees (NNT) and the connection process on the unit cube, with grid cover
//! certificates, per-step metrics and seeded replicated experiments.

pub mod cover;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod nn_index;
pub mod space;
pub mod tree;

pub use error::{Error, Result};

/// Crate version, recorded in tree dump headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
