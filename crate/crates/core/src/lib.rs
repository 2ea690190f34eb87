#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Single-cell 5G NR MAC scheduling simulator with dynamic TDD and a
//! near-real-time RIC control loop.

pub mod channel;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod frame;
pub mod metrics;
pub mod ric;
pub mod rng;
pub mod scenarios;
pub mod sched;
pub mod traffic;

pub use config::ScenarioConfig;
pub use engine::{run, run_with_endpoint, setup, RunResult, SimState};
pub use error::{Error, Result};
