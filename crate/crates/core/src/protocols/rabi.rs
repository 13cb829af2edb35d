//! Driven Rabi oscillations.

use serde::{Deserialize, Serialize};

use super::sequence::{PulseElement, PulseSequence, ReadoutParams};
use crate::dsp::TimeTrace;
use crate::error::{invalid, require_positive, Error, Result};
use crate::spin::RelaxationParams;

const INIT_TIME: f64 = 3e-6;
const READOUT_TIME: f64 = 1e-6;

/// Options for [`run_rabi`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RabiOptions {
    /// Time constant of an exponential damping of the oscillation (s).
    pub drive_decay_time: Option<f64>,
}

fn check_durations(durations: &[f64]) -> Result<()> {
    if durations.is_empty() {
        return Err(Error::Empty("durations"));
    }
    if let Some(d) = durations.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
        return Err(Error::NegativeDuration(*d));
    }
    if durations.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("durations", "must be sorted ascending"));
    }
    Ok(())
}

/// One `init -> pulse -> readout` sequence per pulse duration.
pub fn build_rabi(rabi_frequency: f64, durations: &[f64]) -> Result<Vec<PulseSequence>> {
    require_positive("rabi_frequency", rabi_frequency)?;
    check_durations(durations)?;
    durations
        .iter()
        .map(|&d| {
            PulseSequence::new(
                vec![
                    PulseElement::LaserInit { duration: INIT_TIME },
                    PulseElement::pulse_x(rabi_frequency, d),
                    PulseElement::Readout { duration: READOUT_TIME },
                ],
                1,
            )
        })
        .collect()
}

/// Fluorescence versus pulse duration.
pub fn run_rabi(
    rabi_frequency: f64,
    durations: &[f64],
    readout: &ReadoutParams,
    options: &RabiOptions,
) -> Result<TimeTrace> {
    readout.validate()?;
    if let Some(tau) = options.drive_decay_time {
        require_positive("drive_decay_time", tau)?;
    }
    let sequences = build_rabi(rabi_frequency, durations)?;
    let values = sequences
        .iter()
        .zip(durations)
        .enumerate()
        .map(|(i, (seq, &t))| {
            let z = seq.execute(&RelaxationParams::none())[0].z;
            let envelope = options.drive_decay_time.map_or(1.0, |tau| (-t / tau).exp());
            readout.fluorescence(z * envelope, i)
        })
        .collect();
    Ok(TimeTrace::from_samples(durations.to_vec(), values)?
        .with_tag("experiment", "rabi")
        .with_tag("rabi_frequency_hz", rabi_frequency))
}

/// Evenly spaced pulse durations `0, step, 2 step, ...`.
pub fn linear_durations(step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::fit_decaying_sinusoid;

    #[test]
    fn pi_pulse_is_the_fluorescence_minimum() {
        let readout = ReadoutParams::noiseless();
        let tr = run_rabi(40e6, &[0.0, 12.5e-9, 25e-9], &readout, &RabiOptions::default()).unwrap();
        let v = tr.values();
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert!((v[1] - 0.7).abs() < 1e-12);
        assert!((v[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fits_the_configured_frequency() {
        for omega in [1e6, 10e6, 40e6, 100e6] {
            let durations = linear_durations(1.0 / (omega * 40.0), 200);
            let tr = run_rabi(omega, &durations, &ReadoutParams::noiseless(), &RabiOptions::default()).unwrap();
            let fit = fit_decaying_sinusoid(&tr).unwrap();
            assert!((fit.param("frequency") / omega - 1.0).abs() < 1e-3, "{omega}");
        }
    }

    #[test]
    fn decay_envelope_round_trips() {
        let durations = linear_durations(0.5e-9, 400);
        let opts = RabiOptions {
            drive_decay_time: Some(100e-9),
        };
        let tr = run_rabi(40e6, &durations, &ReadoutParams::noiseless(), &opts).unwrap();
        let fit = fit_decaying_sinusoid(&tr).unwrap();
        assert!((fit.param("decay_time") / 100e-9 - 1.0).abs() < 0.02);
    }

    #[test]
    fn rejects_bad_durations() {
        assert!(matches!(build_rabi(1e6, &[]), Err(Error::Empty(_))));
        assert!(build_rabi(1e6, &[2e-9, 1e-9]).is_err());
        assert!(build_rabi(1e6, &[-1e-9]).is_err());
    }
}
