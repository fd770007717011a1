//! Slice orchestrator: accepts intents, reconciles them against a simulated
//! RAN/core, serves the metrics and what-if API, and persists runs.

pub mod api;
pub mod cli;
pub mod reconcile;
pub mod run;
pub mod session;

pub use session::{Session, SessionConfig};
