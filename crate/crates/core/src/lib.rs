//! Discrete-event simulator of a single Wi-Fi BSS with EDCA channel access
//! and busy-tone priority access for URLLC traffic.
//!
//! A run is described by a [`RunConfig`] and produces a [`RunSummary`];
//! [`sweep`] drives grids of runs from a [`ScenarioConfig`].

pub mod config;
pub mod edca;
pub mod engine;
pub mod error;
pub mod medium;
pub mod metrics;
pub mod rng;
pub mod sim;
pub mod sweep;
pub mod time;
pub mod trace;
pub mod traffic;
pub mod urllc;

pub use config::{parse_config, ConfigError, ScenarioConfig};
pub use error::{SimError, SimResult};
pub use metrics::{RunSummary, Scheme, CSV_HEADER};
pub use sim::{run, run_traced, RunConfig, Simulator};
pub use time::SimTime;
