//! Scenario files shipped with the binary.

use crate::config::{parse_raw, parse_scenario_str, ScenarioConfig};
use crate::error::ScenarioError;

#[derive(Debug, Clone, Copy)]
pub struct Example {
    pub name: &'static str,
    pub text: &'static str,
}

pub const EXAMPLES: [Example; 6] = [
    Example {
        name: "rabi",
        text: include_str!("../scenarios/rabi.toml"),
    },
    Example {
        name: "t1",
        text: include_str!("../scenarios/t1.toml"),
    },
    Example {
        name: "correlation",
        text: include_str!("../scenarios/correlation.toml"),
    },
    Example {
        name: "casr",
        text: include_str!("../scenarios/casr.toml"),
    },
    Example {
        name: "sensitivity",
        text: include_str!("../scenarios/sensitivity.toml"),
    },
    Example {
        name: "signmap",
        text: include_str!("../scenarios/signmap.toml"),
    },
];

pub fn find(name: &str) -> Result<&'static Example, ScenarioError> {
    EXAMPLES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| ScenarioError::UnknownExample(name.into()))
}

impl Example {
    pub fn config(&self) -> Result<ScenarioConfig, ScenarioError> {
        parse_scenario_str(self.text)
    }

    pub fn description(&self) -> String {
        parse_raw(self.text)
            .ok()
            .and_then(|c| c.description)
            .unwrap_or_default()
    }
}
