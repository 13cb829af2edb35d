//! Synchronized-readout (CASR) NMR with Overhauser pre-polarization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::sequence::ReadoutParams;
use super::xy8::FidModel;
use crate::constants::PhysicsConstants;
use crate::dsp::TimeTrace;
use crate::error::{invalid, require_positive, Error, Result};

/// Relative pump detuning from the electron resonance that triggers a warning.
pub const DNP_TOLERANCE: f64 = 0.05;

/// Baseband frequency of `f_signal` sampled at `f_sample`, in `[0, f_sample / 2]`.
pub fn alias_frequency(f_signal: f64, f_sample: f64) -> f64 {
    let r = f_signal.rem_euclid(f_sample);
    r.min(f_sample - r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CasrSettings {
    /// Length of one decoupling subsequence; the sampling period.
    pub subsequence_duration: f64,
    pub n_repetitions: usize,
    /// Total record length; must equal `subsequence_duration * n_repetitions`.
    pub acquisition_time: f64,
    /// NV gyromagnetic ratio, Hz/T.
    pub gamma_nv: f64,
    pub dnp_gain: f64,
    /// Effective sensitivity of one subsequence to the nuclear field,
    /// relative to a static field over the same duration.
    pub filter_gain: f64,
    pub readout: ReadoutParams,
}

impl Default for CasrSettings {
    fn default() -> Self {
        Self {
            subsequence_duration: 1.0 / 9470.0,
            n_repetitions: 9470,
            acquisition_time: 1.0,
            gamma_nv: crate::constants::GAMMA_ELECTRON,
            dnp_gain: 1.0,
            filter_gain: 2.0 / PI,
            readout: ReadoutParams::default(),
        }
    }
}

impl CasrSettings {
    pub fn validate(&self) -> Result<()> {
        require_positive("subsequence_duration", self.subsequence_duration)?;
        require_positive("acquisition_time", self.acquisition_time)?;
        require_positive("gamma_nv", self.gamma_nv)?;
        require_positive("filter_gain", self.filter_gain)?;
        if !(self.dnp_gain >= 1.0 && self.dnp_gain.is_finite()) {
            return Err(invalid(
                "dnp_gain",
                format!("must be at least 1, got {}", self.dnp_gain),
            ));
        }
        if self.n_repetitions < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: self.n_repetitions,
            });
        }
        let span = self.subsequence_duration * self.n_repetitions as f64;
        if (span - self.acquisition_time).abs() > 1e-9 * self.acquisition_time {
            return Err(Error::InconsistentTiming(format!(
                "{} subsequences of {} s last {span} s, not {} s",
                self.n_repetitions, self.subsequence_duration, self.acquisition_time
            )));
        }
        self.readout.validate()
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.subsequence_duration
    }
}

/// One sample per subsequence.
///
/// Sample `k` stores `sin(phi_k)` where `phi_k` is the phase the NV picks up
/// from the (DNP-enhanced, decaying) nuclear field during window `k`.
pub fn run_casr(fid: &FidModel, settings: &CasrSettings) -> Result<TimeTrace> {
    fid.validate()?;
    settings.validate()?;
    let ts = settings.subsequence_duration;
    let scale = 2.0 * PI * settings.gamma_nv * settings.filter_gain * ts * settings.dnp_gain;
    let values = (0..settings.n_repetitions)
        .map(|k| {
            let t = k as f64 * ts;
            let z = (scale * fid.field(t, 0.0)).sin();
            settings.readout.population(z, k)
        })
        .collect();
    Ok(TimeTrace::uniform(0.0, ts, values)?
        .with_tag("experiment", "casr")
        .with_tag("sample_rate_hz", settings.sample_rate()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DnpConfig {
    pub gain: f64,
    /// Pump frequency (Hz); `None` means the pump is placed on resonance.
    pub pump_frequency: Option<f64>,
    /// Bias field (T).
    pub b0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DnpOutcome {
    pub gain: f64,
    /// Free-electron resonance `gamma_e * B0`.
    pub electron_resonance: f64,
    pub warning: Option<String>,
}

/// Validates the pump configuration and returns the polarization gain.
pub fn dnp_pump(config: &DnpConfig, constants: &PhysicsConstants) -> Result<DnpOutcome> {
    if !(config.gain >= 1.0 && config.gain.is_finite()) {
        return Err(invalid("gain", format!("must be at least 1, got {}", config.gain)));
    }
    require_positive("b0", config.b0)?;
    let resonance = constants.gamma_electron * config.b0;
    let warning = config.pump_frequency.and_then(|f| {
        let rel = (f - resonance).abs() / resonance;
        (rel > DNP_TOLERANCE).then(|| {
            format!(
                "pump at {:.4} GHz is {:.1}% away from the electron resonance at {:.4} GHz",
                f / 1e9,
                rel * 100.0,
                resonance / 1e9
            )
        })
    });
    Ok(DnpOutcome {
        gain: config.gain,
        electron_resonance: resonance,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alias_examples() {
        assert_eq!(alias_frequency(1000.0, 9470.0), 1000.0);
        assert_eq!(alias_frequency(9470.0, 9470.0), 0.0);
        assert!((alias_frequency(7.6639e6, 9470.0) - 2670.0).abs() < 1.0);
        assert!((alias_frequency(6000.0, 9470.0) - 3470.0).abs() < 1e-9);
    }

    #[test]
    fn flat_without_signal() {
        let fid = FidModel::doublet(7.6639e6, 14.0, 1.0 / (PI * 5.0), 0.0).unwrap();
        let tr = run_casr(&fid, &CasrSettings::default()).unwrap();
        assert_eq!(tr.len(), 9470);
        assert!(tr.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn timing_must_match() {
        let fid = FidModel::singlet(7.6639e6, 0.1, 1e-12).unwrap();
        let settings = CasrSettings {
            n_repetitions: 9000,
            ..CasrSettings::default()
        };
        assert!(matches!(run_casr(&fid, &settings), Err(Error::InconsistentTiming(_))));
        let settings = CasrSettings {
            dnp_gain: 0.5,
            ..CasrSettings::default()
        };
        assert!(run_casr(&fid, &settings).is_err());
    }

    #[test]
    fn unit_gain_leaves_amplitude_unchanged() {
        let fid = FidModel::singlet(7.6639e6, 0.1, 1e-12).unwrap();
        let a = run_casr(&fid, &CasrSettings::default()).unwrap();
        let thermal = FidModel::singlet(7.6639e6, 0.1, 1e-12).unwrap();
        let b = run_casr(
            &thermal,
            &CasrSettings {
                dnp_gain: 1.0,
                ..CasrSettings::default()
            },
        )
        .unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn dnp_resonance_and_warning() {
        let c = PhysicsConstants::default();
        let ok = dnp_pump(
            &DnpConfig {
                gain: 1.0,
                pump_frequency: None,
                b0: 0.175,
            },
            &c,
        )
        .unwrap();
        assert!((ok.electron_resonance - 4.90e9).abs() < 0.01e9);
        assert!(ok.warning.is_none());
        let off = dnp_pump(
            &DnpConfig {
                gain: 10.0,
                pump_frequency: Some(6e9),
                b0: 0.175,
            },
            &c,
        )
        .unwrap();
        assert!(off.warning.is_some());
        assert!(dnp_pump(
            &DnpConfig {
                gain: 0.9,
                pump_frequency: None,
                b0: 0.175
            },
            &c
        )
        .is_err());
    }
}
