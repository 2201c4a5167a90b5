//! Combinatorial semi-bandits with metered oracle adaptivity and query
//! complexity.

pub mod algo;
pub mod envs;
pub mod error;
pub mod oracle;
pub mod parallel;
pub mod rng;
pub mod runner;
pub mod schedule;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use types::{Action, ActionSet, ActionSetKind, ComplexityLedger, Observation};
