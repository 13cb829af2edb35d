//! Physical constants used across the simulator.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_positive, Result};

/// NV ground-state zero-field splitting (Hz).
pub const ZERO_FIELD_SPLITTING: f64 = 2.87e9;
/// Electron gyromagnetic ratio (Hz/T).
pub const GAMMA_ELECTRON: f64 = 2.8025e10;
/// mu0 / 4pi (T m / A, equivalently T m^3 per J/T).
pub const MU0_OVER_4PI: f64 = 1e-7;
/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Nuclear species the protocols know about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Nucleus {
    #[serde(rename = "1H")]
    H1,
    #[serde(rename = "19F")]
    F19,
    #[serde(rename = "31P")]
    P31,
}

impl Nucleus {
    pub const ALL: [Nucleus; 3] = [Nucleus::H1, Nucleus::F19, Nucleus::P31];

    /// Tabulated gyromagnetic ratio in Hz/T.
    pub fn default_gamma(self) -> f64 {
        match self {
            Nucleus::H1 => 42.577e6,
            Nucleus::F19 => 40.053e6,
            Nucleus::P31 => 17.235e6,
        }
    }

    /// Magnetic moment of a spin-1/2 nucleus, gamma * h * I (J/T).
    pub fn default_moment(self) -> f64 {
        self.default_gamma() * PLANCK * 0.5
    }
}

impl fmt::Display for Nucleus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Nucleus::H1 => "1H",
            Nucleus::F19 => "19F",
            Nucleus::P31 => "31P",
        })
    }
}

impl FromStr for Nucleus {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1H" | "H1" | "proton" => Ok(Nucleus::H1),
            "19F" | "F19" => Ok(Nucleus::F19),
            "31P" | "P31" => Ok(Nucleus::P31),
            other => Err(invalid("nucleus", format!("unknown species `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConstants {
    /// D, the zero-field splitting (Hz).
    pub zero_field_splitting: f64,
    /// Electron gyromagnetic ratio (Hz/T).
    pub gamma_electron: f64,
    pub mu0_over_4pi: f64,
    /// Nuclear gyromagnetic ratios (Hz/T).
    pub gamma: BTreeMap<Nucleus, f64>,
    /// Nuclear magnetic moments (J/T).
    pub nuclear_moment: BTreeMap<Nucleus, f64>,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            zero_field_splitting: ZERO_FIELD_SPLITTING,
            gamma_electron: GAMMA_ELECTRON,
            mu0_over_4pi: MU0_OVER_4PI,
            gamma: Nucleus::ALL.iter().map(|n| (*n, n.default_gamma())).collect(),
            nuclear_moment: Nucleus::ALL.iter().map(|n| (*n, n.default_moment())).collect(),
        }
    }
}

impl PhysicsConstants {
    pub fn validate(&self) -> Result<()> {
        require_positive("zero_field_splitting", self.zero_field_splitting)?;
        require_positive("gamma_electron", self.gamma_electron)?;
        require_positive("mu0_over_4pi", self.mu0_over_4pi)?;
        for v in self.gamma.values() {
            require_positive("gamma", *v)?;
        }
        for v in self.nuclear_moment.values() {
            require_positive("nuclear_moment", *v)?;
        }
        Ok(())
    }

    pub fn gamma_of(&self, nucleus: Nucleus) -> f64 {
        self.gamma
            .get(&nucleus)
            .copied()
            .unwrap_or_else(|| nucleus.default_gamma())
    }

    pub fn moment_of(&self, nucleus: Nucleus) -> f64 {
        self.nuclear_moment
            .get(&nucleus)
            .copied()
            .unwrap_or_else(|| nucleus.default_moment())
    }

    /// Largest bias field for which the |0> -> |-1> transition stays positive.
    pub fn anticrossing_field(&self) -> f64 {
        self.zero_field_splitting / self.gamma_electron
    }
}
