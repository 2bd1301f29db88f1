//! Command-line front end: scenario files, run modes and output layout.

pub mod config;
pub mod run;

pub use config::{parse_scenario, parse_scenario_str, ScenarioFile};
pub use run::{run, Check, Mode, RunManifest, RunReport};
