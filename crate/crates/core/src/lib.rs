//! Intent-driven end-to-end network slicing: slice intents, CPU/throughput
//! models of virtualized NFs, RTT-bounded placement over edge/regional/central
//! pools, PRB water-filling, closed-loop compute assurance and a
//! deterministic simulator tying them together.

pub mod assurance;
pub mod compute;
pub mod error;
pub mod model;
pub mod placement;
pub mod radio;
pub mod scenario;
pub mod sim;

pub use error::ModelError;
pub use model::{SliceId, SliceIntent};
pub use scenario::{load_scenario, Scenario};
pub use sim::{Engine, EngineOptions, MetricsFrame};
