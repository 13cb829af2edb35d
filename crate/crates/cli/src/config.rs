//! Scenario files.
//!
//! A scenario is a TOML document with a top-level `experiment` key and one
//! table per concern. Units: seconds, hertz, tesla; geometry in micrometres;
//! Gd concentrations in micromolar.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nvfluidics_core::constants::{Nucleus, PhysicsConstants};
use nvfluidics_core::geomc::{
    default_depth_grid, ChannelGeometry, EnsembleOptions, McParams, SensorCylinder, SpinIntegration, Statistic,
};
use nvfluidics_core::protocols::{ReadoutParams, T1Decay};
use serde::{Deserialize, Serialize};

use crate::error::{Issue, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rabi,
    T1,
    Correlation,
    Casr,
    Sensitivity,
    Signmap,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::Rabi,
        Self::T1,
        Self::Correlation,
        Self::Casr,
        Self::Sensitivity,
        Self::Signmap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rabi => "rabi",
            Self::T1 => "t1",
            Self::Correlation => "correlation",
            Self::Casr => "casr",
            Self::Sensitivity => "sensitivity",
            Self::Signmap => "signmap",
        }
    }

    fn uses_readout(self) -> bool {
        matches!(self, Self::Rabi | Self::T1 | Self::Correlation | Self::Casr)
    }

    fn uses_geometry(self) -> bool {
        matches!(self, Self::Sensitivity | Self::Signmap)
    }

    /// Readout averaging used when a scenario does not set one.
    fn default_averaging(self) -> u64 {
        match self {
            Self::T1 => 5_000,
            Self::Correlation => 80_000,
            Self::Casr => 100,
            _ => 1,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "ConstantOverrides::is_empty")]
    pub constants: ConstantOverrides,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi: Option<RabiConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<T1Config>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub casr: Option<CasrConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor: Option<SensorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signmap: Option<SignmapConfig>,
}

/// Overrides applied on top of the built-in physical constants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_field_splitting: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_electron: Option<f64>,
    /// Nuclear gyromagnetic ratios keyed by species, e.g. `"19F"`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gamma: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub nuclear_moment: BTreeMap<String, f64>,
}

impl ConstantOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn resolve(&self) -> PhysicsConstants {
        let mut c = PhysicsConstants::default();
        if let Some(v) = self.zero_field_splitting {
            c.zero_field_splitting = v;
        }
        if let Some(v) = self.gamma_electron {
            c.gamma_electron = v;
        }
        for (k, v) in &self.gamma {
            if let Ok(n) = k.parse::<Nucleus>() {
                c.gamma.insert(n, *v);
            }
        }
        for (k, v) in &self.nuclear_moment {
            if let Ok(n) = k.parse::<Nucleus>() {
                c.nuclear_moment.insert(n, *v);
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory, relative to the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// File name stem for every artifact; defaults to the experiment name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
    #[serde(default = "yes")]
    pub plots: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            stem: None,
            plots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    #[serde(default = "ReadoutConfig::default_contrast")]
    pub contrast: f64,
    #[serde(default = "ReadoutConfig::default_baseline")]
    pub baseline: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging: Option<u64>,
}

impl ReadoutConfig {
    fn default_contrast() -> f64 {
        0.3
    }

    fn default_baseline() -> f64 {
        1.0
    }

    pub fn params(&self, seed: u64) -> ReadoutParams {
        ReadoutParams {
            contrast: self.contrast,
            baseline: self.baseline,
            noise_sigma: self.noise_sigma,
            averaging: self.averaging.unwrap_or(1),
            seed,
        }
    }
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            contrast: Self::default_contrast(),
            baseline: Self::default_baseline(),
            noise_sigma: 0.0,
            averaging: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RabiConfig {
    pub rabi_frequency: f64,
    /// Pulse-duration increment.
    pub step: f64,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_decay_time: Option<f64>,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            rabi_frequency: 40e6,
            step: 0.5e-9,
            points: 400,
            drive_decay_time: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecayConfig {
    #[default]
    Single,
    TwoComponent {
        fast_fraction: f64,
        fast_factor: f64,
    },
}

impl From<DecayConfig> for T1Decay {
    fn from(d: DecayConfig) -> Self {
        match d {
            DecayConfig::Single => T1Decay::Single,
            DecayConfig::TwoComponent {
                fast_fraction,
                fast_factor,
            } => T1Decay::TwoComponent {
                fast_fraction,
                fast_factor,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct T1Config {
    /// Gd concentrations in micromolar, one curve each.
    pub concentrations: Vec<f64>,
    /// Rate enhancement, 1/(s mol/L).
    pub rate_constant: f64,
    pub intrinsic_gamma1: f64,
    pub tau_start: f64,
    pub tau_stop: f64,
    pub points: usize,
    pub decay: DecayConfig,
}

impl Default for T1Config {
    fn default() -> Self {
        Self {
            concentrations: vec![0.0, 1.0, 10.0],
            rate_constant: 1e8,
            intrinsic_gamma1: 500.0,
            tau_start: 200e-9,
            tau_stop: 5.5e-3,
            points: 51,
            decay: DecayConfig::Single,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationConfig {
    pub nucleus: String,
    pub b0: f64,
    /// Nuclear field amplitude at the NV layer.
    pub amplitude: f64,
    pub decay_time: f64,
    pub n_pulses: usize,
    pub t_start: f64,
    pub t_stop: f64,
    pub points: usize,
    pub phase_samples: usize,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            nucleus: "19F".into(),
            b0: 0.031,
            amplitude: 2e-8,
            decay_time: 300e-6,
            n_pulses: 32,
            t_start: 2e-6,
            t_stop: 502e-6,
            points: 2501,
            phase_samples: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CasrConfig {
    pub nucleus: String,
    pub b0: f64,
    /// Doublet splitting; zero gives a single line.
    pub splitting: f64,
    pub decay_time: f64,
    pub amplitude: f64,
    pub sample_rate: f64,
    pub n_repetitions: usize,
    pub acquisition_time: f64,
    pub dnp_gain: f64,
    pub filter_gain: f64,
}

impl Default for CasrConfig {
    fn default() -> Self {
        Self {
            nucleus: "1H".into(),
            b0: 0.18,
            splitting: 14.0,
            decay_time: 1.0 / (PI * 5.0),
            amplitude: 1e-9,
            sample_rate: 9470.0,
            n_repetitions: 9470,
            acquisition_time: 1.0,
            dnp_gain: 1.0,
            filter_gain: 2.0 / PI,
        }
    }
}

impl CasrConfig {
    pub fn n_lines(&self) -> usize {
        if self.splitting > 0.0 {
            2
        } else {
            1
        }
    }
}

/// Microfluidic channel in micrometres; the diamond surface is at z = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Gap between the diamond surface and the channel floor.
    pub floor_offset: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let chip = ChannelGeometry::chip();
        Self {
            length: chip.length,
            width: chip.width,
            height: chip.height,
            floor_offset: chip.floor_offset,
        }
    }
}

impl GeometryConfig {
    pub fn channel(&self) -> ChannelGeometry {
        ChannelGeometry {
            length: self.length,
            width: self.width,
            height: self.height,
            floor_offset: self.floor_offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    /// Laser spot diameter in micrometres.
    pub diameter: f64,
    /// Lateral offset of the spot from the channel axis, micrometres.
    pub center: [f64; 2],
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            diameter: 45.0,
            center: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_nv_samples: usize,
    /// Spins per average; only used with `integration = "monte_carlo"`.
    /// Spins are re-drawn for every average.
    pub n_spin_samples: usize,
    pub n_averages: usize,
    pub bootstrap_resamples: usize,
    pub statistic: Statistic,
    pub integration: SpinIntegration,
    /// Nuclear species setting the moment per sample spin.
    pub nucleus: String,
}

impl Default for McConfig {
    fn default() -> Self {
        let desk = McParams::desk(0);
        Self {
            n_nv_samples: desk.n_nv_samples,
            n_spin_samples: desk.n_spin_samples,
            n_averages: desk.n_averages,
            bootstrap_resamples: 200,
            statistic: Statistic::Mean,
            integration: SpinIntegration::ClosedForm,
            nucleus: "1H".into(),
        }
    }
}

impl McConfig {
    pub fn params(&self, seed: u64) -> McParams {
        McParams {
            n_nv_samples: self.n_nv_samples,
            n_spin_samples: self.n_spin_samples,
            n_averages: self.n_averages,
            seed,
        }
    }

    pub fn ensemble(&self, constants: &PhysicsConstants) -> EnsembleOptions {
        EnsembleOptions {
            statistic: self.statistic,
            integration: self.integration,
            moment: self.nucleus.parse().map_or(f64::NAN, |n| constants.moment_of(n)),
            ..EnsembleOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityConfig {
    /// NV layer thicknesses in micrometres, strictly ascending.
    pub d_nv: Vec<f64>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            d_nv: default_depth_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignmapConfig {
    pub d_nv: f64,
    pub ny: usize,
    pub nz: usize,
    pub n_nv_samples: usize,
}

impl Default for SignmapConfig {
    fn default() -> Self {
        Self {
            d_nv: 10.0,
            ny: 41,
            nz: 33,
            n_nv_samples: 400,
        }
    }
}

impl ScenarioConfig {
    /// Fills every table the experiment uses with its defaults.
    pub fn fill_defaults(&mut self) {
        let kind = self.experiment;
        if self.output.dir.is_none() {
            self.output.dir = Some(Path::new("out").join(kind.name()));
        }
        if self.output.stem.is_none() {
            self.output.stem = Some(kind.name().into());
        }
        if kind.uses_readout() {
            let readout = self.readout.get_or_insert_with(ReadoutConfig::default);
            readout.averaging.get_or_insert(kind.default_averaging());
        }
        match kind {
            ExperimentKind::Rabi => {
                self.rabi.get_or_insert_with(Default::default);
            }
            ExperimentKind::T1 => {
                self.t1.get_or_insert_with(Default::default);
            }
            ExperimentKind::Correlation => {
                self.correlation.get_or_insert_with(Default::default);
            }
            ExperimentKind::Casr => {
                self.casr.get_or_insert_with(Default::default);
            }
            ExperimentKind::Sensitivity => {
                self.sensitivity.get_or_insert_with(Default::default);
            }
            ExperimentKind::Signmap => {
                self.signmap.get_or_insert_with(Default::default);
            }
        }
        if kind.uses_geometry() {
            self.geometry.get_or_insert_with(Default::default);
            self.sensor.get_or_insert_with(Default::default);
            self.mc.get_or_insert_with(Default::default);
        }
    }

    /// Switches Monte Carlo counts to [`McParams::full`].
    pub fn apply_full_scale(&mut self) {
        if let Some(mc) = &mut self.mc {
            let full = McParams::full(0);
            mc.n_averages = full.n_averages;
            mc.n_spin_samples = full.n_spin_samples;
            mc.n_nv_samples = full.n_nv_samples;
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| Path::new("out").join(self.experiment.name()))
    }

    pub fn stem(&self) -> &str {
        self.output.stem.as_deref().unwrap_or(self.experiment.name())
    }

    pub fn constants(&self) -> PhysicsConstants {
        self.constants.resolve()
    }

    /// Checks every parameter the experiment will use.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut v = Validator::default();
        self.check(&mut v);
        v.finish()
    }

    fn check(&self, v: &mut Validator) {
        let kind = self.experiment;
        let present: [(&str, bool, bool); 10] = [
            ("readout", self.readout.is_some(), kind.uses_readout()),
            ("rabi", self.rabi.is_some(), kind == ExperimentKind::Rabi),
            ("t1", self.t1.is_some(), kind == ExperimentKind::T1),
            (
                "correlation",
                self.correlation.is_some(),
                kind == ExperimentKind::Correlation,
            ),
            ("casr", self.casr.is_some(), kind == ExperimentKind::Casr),
            ("geometry", self.geometry.is_some(), kind.uses_geometry()),
            ("sensor", self.sensor.is_some(), kind.uses_geometry()),
            ("mc", self.mc.is_some(), kind.uses_geometry()),
            (
                "sensitivity",
                self.sensitivity.is_some(),
                kind == ExperimentKind::Sensitivity,
            ),
            ("signmap", self.signmap.is_some(), kind == ExperimentKind::Signmap),
        ];
        for (table, is_set, used) in present {
            if is_set && !used {
                v.push(table, format!("table is not used by experiment `{kind}`"));
            }
        }

        self.check_constants(v);
        if let Some(stem) = &self.output.stem {
            if stem.is_empty() || stem.contains(['/', '\\']) {
                v.push("output.stem", "must be a plain, non-empty file name");
            }
        }
        if let Some(r) = &self.readout {
            if !(r.contrast > 0.0 && r.contrast <= 1.0) {
                v.push("readout.contrast", format!("must lie in (0, 1], got {}", r.contrast));
            }
            v.positive("readout.baseline", r.baseline);
            v.non_negative("readout.noise_sigma", r.noise_sigma);
            if r.averaging == Some(0) {
                v.push("readout.averaging", "must be at least 1");
            }
        }
        if let Some(c) = &self.rabi {
            v.positive("rabi.rabi_frequency", c.rabi_frequency);
            v.positive("rabi.step", c.step);
            v.at_least("rabi.points", c.points, 4);
            if let Some(t) = c.drive_decay_time {
                v.positive("rabi.drive_decay_time", t);
            }
        }
        if let Some(c) = &self.t1 {
            if c.concentrations.is_empty() {
                v.push("t1.concentrations", "must list at least one concentration");
            }
            for (i, x) in c.concentrations.iter().enumerate() {
                v.non_negative(&format!("t1.concentrations[{i}]"), *x);
            }
            v.non_negative("t1.rate_constant", c.rate_constant);
            v.non_negative("t1.intrinsic_gamma1", c.intrinsic_gamma1);
            v.positive("t1.tau_start", c.tau_start);
            v.positive("t1.tau_stop", c.tau_stop);
            if !(c.tau_stop > c.tau_start) {
                v.push("t1.tau_stop", "must exceed t1.tau_start");
            }
            v.at_least("t1.points", c.points, 6);
            if let DecayConfig::TwoComponent {
                fast_fraction,
                fast_factor,
            } = c.decay
            {
                if !(0.0..=1.0).contains(&fast_fraction) {
                    v.push(
                        "t1.decay.fast_fraction",
                        format!("must lie in [0, 1], got {fast_fraction}"),
                    );
                }
                if !(fast_factor >= 1.0 && fast_factor.is_finite()) {
                    v.push("t1.decay.fast_factor", format!("must be at least 1, got {fast_factor}"));
                }
            }
        }
        if let Some(c) = &self.correlation {
            v.nucleus("correlation.nucleus", &c.nucleus);
            v.positive("correlation.b0", c.b0);
            v.non_negative("correlation.amplitude", c.amplitude);
            v.positive("correlation.decay_time", c.decay_time);
            if c.n_pulses == 0 || !c.n_pulses.is_multiple_of(8) {
                v.push(
                    "correlation.n_pulses",
                    format!("must be a positive multiple of 8, got {}", c.n_pulses),
                );
            }
            v.non_negative("correlation.t_start", c.t_start);
            if !(c.t_stop > c.t_start) {
                v.push("correlation.t_stop", "must exceed correlation.t_start");
            }
            v.at_least("correlation.points", c.points, 4);
            v.at_least("correlation.phase_samples", c.phase_samples, 1);
        }
        if let Some(c) = &self.casr {
            v.nucleus("casr.nucleus", &c.nucleus);
            v.positive("casr.b0", c.b0);
            v.non_negative("casr.splitting", c.splitting);
            v.positive("casr.decay_time", c.decay_time);
            v.non_negative("casr.amplitude", c.amplitude);
            v.positive("casr.sample_rate", c.sample_rate);
            v.positive("casr.acquisition_time", c.acquisition_time);
            v.at_least("casr.n_repetitions", c.n_repetitions, 16);
            if !(c.dnp_gain >= 1.0 && c.dnp_gain.is_finite()) {
                v.push("casr.dnp_gain", format!("must be at least 1, got {}", c.dnp_gain));
            }
            v.positive("casr.filter_gain", c.filter_gain);
            let span = c.n_repetitions as f64 / c.sample_rate;
            if c.sample_rate > 0.0 && (span - c.acquisition_time).abs() > 1e-9 * c.acquisition_time {
                v.push(
                    "casr.acquisition_time",
                    format!(
                        "{} repetitions at {} Hz last {span} s, not {} s",
                        c.n_repetitions, c.sample_rate, c.acquisition_time
                    ),
                );
            }
        }
        if let Some(g) = &self.geometry {
            v.positive("geometry.length", g.length);
            v.positive("geometry.width", g.width);
            v.positive("geometry.height", g.height);
            v.non_negative("geometry.floor_offset", g.floor_offset);
        }
        if let Some(s) = &self.sensor {
            v.positive("sensor.diameter", s.diameter);
            for (i, c) in s.center.iter().enumerate() {
                v.finite(&format!("sensor.center[{i}]"), *c);
            }
        }
        if let Some(m) = &self.mc {
            v.at_least("mc.n_nv_samples", m.n_nv_samples, 1);
            v.at_least("mc.n_averages", m.n_averages, 2);
            if m.integration == SpinIntegration::MonteCarlo {
                v.at_least("mc.n_spin_samples", m.n_spin_samples, 1);
            }
            if m.statistic == Statistic::Rms && m.integration == SpinIntegration::ClosedForm {
                v.push("mc.statistic", "rms needs integration = \"monte_carlo\"");
            }
            v.nucleus("mc.nucleus", &m.nucleus);
        }
        if let Some(c) = &self.sensitivity {
            if c.d_nv.is_empty() {
                v.push("sensitivity.d_nv", "must list at least one thickness");
            }
            for (i, d) in c.d_nv.iter().enumerate() {
                v.positive(&format!("sensitivity.d_nv[{i}]"), *d);
            }
            if c.d_nv.windows(2).any(|w| !(w[1] > w[0])) {
                v.push("sensitivity.d_nv", "must be strictly ascending");
            }
            if let Some(m) = &self.mc {
                if m.bootstrap_resamples == 0 {
                    v.push("mc.bootstrap_resamples", "must be at least 1");
                }
            }
        }
        if let Some(c) = &self.signmap {
            v.positive("signmap.d_nv", c.d_nv);
            v.at_least("signmap.ny", c.ny, 2);
            v.at_least("signmap.nz", c.nz, 2);
            v.at_least("signmap.n_nv_samples", c.n_nv_samples, 2);
        }
        if let (Some(g), Some(s)) = (&self.geometry, &self.sensor) {
            let channel = g.channel();
            if v.issues.is_empty() {
                if let Err(e) = channel.validate() {
                    v.push("geometry", e.to_string());
                }
                if let Err(e) = SensorCylinder::new(s.diameter, 1.0, s.center) {
                    v.push("sensor", e.to_string());
                }
            }
        }
    }

    fn check_constants(&self, v: &mut Validator) {
        let c = &self.constants;
        if let Some(x) = c.zero_field_splitting {
            v.positive("constants.zero_field_splitting", x);
        }
        if let Some(x) = c.gamma_electron {
            v.positive("constants.gamma_electron", x);
        }
        for (table, map) in [("gamma", &c.gamma), ("nuclear_moment", &c.nuclear_moment)] {
            for (k, x) in map {
                let path = format!("constants.{table}.{k}");
                if Nucleus::from_str(k).is_err() {
                    v.push(&path, format!("unknown nucleus `{k}` (expected 1H, 19F or 31P)"));
                }
                v.positive(&path, *x);
            }
        }
    }
}

#[derive(Default)]
struct Validator {
    issues: Vec<Issue>,
}

impl Validator {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.issues.push(Issue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: &str, x: f64) {
        if !(x > 0.0 && x.is_finite()) {
            self.push(path, format!("must be positive and finite, got {x}"));
        }
    }

    fn non_negative(&mut self, path: &str, x: f64) {
        if !(x >= 0.0 && x.is_finite()) {
            self.push(path, format!("must be non-negative and finite, got {x}"));
        }
    }

    fn finite(&mut self, path: &str, x: f64) {
        if !x.is_finite() {
            self.push(path, format!("must be finite, got {x}"));
        }
    }

    fn at_least(&mut self, path: &str, n: usize, min: usize) {
        if n < min {
            self.push(path, format!("must be at least {min}, got {n}"));
        }
    }

    fn nucleus(&mut self, path: &str, name: &str) {
        if Nucleus::from_str(name).is_err() {
            self.push(path, format!("unknown nucleus `{name}` (expected 1H, 19F or 31P)"));
        }
    }

    fn finish(self) -> Result<(), ScenarioError> {
        if self.issues.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(self.issues))
        }
    }
}

/// Parses TOML text into a scenario without filling defaults.
pub fn parse_raw(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ScenarioError::Syntax(e.message().to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Invalid(vec![Issue {
            path: if path == "." { "<root>".into() } else { path },
            message: e.into_inner().message().to_string(),
        }])
    })
}

/// Parses, fills defaults and validates a scenario held in memory.
pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut config = parse_raw(text)?;
    config.fill_defaults();
    config.validate()?;
    Ok(config)
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_str(&text)
}

pub fn to_toml(config: &ScenarioConfig) -> Result<String, ScenarioError> {
    toml::to_string(config).map_err(|e| ScenarioError::Serialize(e.to_string()))
}
