//! Scenario runner for the nvfluidics simulator.
//!
//! Scenarios are TOML files naming one experiment. A run writes CSV tables,
//! SVG plots and a manifest recording the resolved configuration and the
//! SHA-256 digest of every output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod examples;
pub mod output;
pub mod plot;
pub mod run;

pub use config::{parse_scenario, parse_scenario_str, ExperimentKind, ScenarioConfig};
pub use error::{Issue, ScenarioError};
pub use nvfluidics_core::geomc::sensing_volume;
pub use run::{execute, run, RunManifest, RunOutput};
