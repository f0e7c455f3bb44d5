//! Adaptive-temperature softmax agents with a count-based exploration bonus,
//! compared against a decaying epsilon-greedy learner on piecewise-stationary
//! Bernoulli bandits.

pub mod agent;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod policy;
pub mod report;
pub mod rng;

pub use agent::{Agent, BaselineAgent, BaselineParams, FreeWillAgent, FreeWillParams};
pub use config::{Preset, RunConfig};
pub use env::{BanditEnv, PhaseSchedule};
pub use error::{Error, Result};
pub use experiment::{run_many, run_single, AggregateResult, ExperimentConfig};
pub use policy::PolicyDistribution;
pub use rng::RngStream;
