//! T1 relaxometry of paramagnetic ions.

use serde::{Deserialize, Serialize};

use super::sequence::{PulseElement, PulseSequence, ReadoutParams};
use crate::dsp::TimeTrace;
use crate::error::{invalid, require_non_negative, require_positive, Result};
use crate::spin::RelaxationParams;

/// Gd3+ solution in contact with the NV layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdSample {
    /// mol/L.
    pub concentration: f64,
    /// Relaxation rate enhancement per unit concentration, 1/(s mol/L).
    pub rate_constant: f64,
    /// NV relaxation rate without Gd, 1/s.
    pub intrinsic_gamma1: f64,
}

impl GdSample {
    pub fn new(concentration: f64, rate_constant: f64, intrinsic_gamma1: f64) -> Result<Self> {
        require_non_negative("concentration", concentration)?;
        require_non_negative("rate_constant", rate_constant)?;
        require_non_negative("intrinsic_gamma1", intrinsic_gamma1)?;
        Ok(Self {
            concentration,
            rate_constant,
            intrinsic_gamma1,
        })
    }
}

/// `intrinsic_gamma1 + rate_constant * concentration`.
pub fn gd_relaxation_rate(sample: &GdSample) -> f64 {
    sample.intrinsic_gamma1 + sample.rate_constant * sample.concentration
}

/// Shape of the population decay.
///
/// `TwoComponent` splits the ensemble into a fraction relaxing `fast_factor`
/// times faster than the Gd rate and the remainder relaxing at the Gd rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum T1Decay {
    #[default]
    Single,
    TwoComponent {
        fast_fraction: f64,
        fast_factor: f64,
    },
}

impl T1Decay {
    pub fn validate(&self) -> Result<()> {
        if let Self::TwoComponent {
            fast_fraction,
            fast_factor,
        } = *self
        {
            if !(0.0..=1.0).contains(&fast_fraction) {
                return Err(invalid(
                    "fast_fraction",
                    format!("must lie in [0, 1], got {fast_fraction}"),
                ));
            }
            if !(fast_factor >= 1.0 && fast_factor.is_finite()) {
                return Err(invalid("fast_factor", format!("must be at least 1, got {fast_factor}")));
            }
        }
        Ok(())
    }

    /// `(weight, rate)` pairs for a given Gd rate.
    pub fn components(&self, gd_rate: f64) -> Vec<(f64, f64)> {
        match *self {
            Self::Single => vec![(1.0, gd_rate)],
            Self::TwoComponent {
                fast_fraction,
                fast_factor,
            } => vec![(fast_fraction, fast_factor * gd_rate), (1.0 - fast_fraction, gd_rate)],
        }
    }
}

/// `n` log-spaced points from `start` to `stop` inclusive.
pub fn log_spaced(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let (a, b) = (start.ln(), stop.ln());
    (0..n)
        .map(|i| match i {
            0 => start,
            _ if i == n - 1 => stop,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// 51 log-spaced delays from 200 ns to 5.5 ms.
pub fn default_t1_grid() -> Vec<f64> {
    log_spaced(200e-9, 5.5e-3, 51)
}

/// Normalized population versus dark time.
///
/// Each point runs `init -> wait(tau) -> readout` under pure longitudinal
/// relaxation and reports `(F - F_mixed) / (F_bright - F_mixed)`, which is 1
/// right after initialization and 0 once fully relaxed.
pub fn run_t1(taus: &[f64], sample: &GdSample, decay: &T1Decay, readout: &ReadoutParams) -> Result<TimeTrace> {
    readout.validate()?;
    decay.validate()?;
    if taus.is_empty() {
        return Err(crate::error::Error::Empty("taus"));
    }
    for &t in taus {
        require_positive("tau", t)?;
    }
    let gd_rate = gd_relaxation_rate(sample);
    let components = decay
        .components(gd_rate)
        .into_iter()
        .map(|(w, rate)| Ok((w, RelaxationParams::longitudinal(rate)?)))
        .collect::<Result<Vec<_>>>()?;
    let values = taus
        .iter()
        .enumerate()
        .map(|(i, &tau)| {
            let seq = PulseSequence::new(
                vec![
                    PulseElement::LaserInit { duration: 3e-6 },
                    PulseElement::wait(tau),
                    PulseElement::Readout { duration: 1e-6 },
                ],
                1,
            )?;
            let z: f64 = components.iter().map(|(w, relax)| w * seq.execute(relax)[0].z).sum();
            Ok(readout.population(z, i))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TimeTrace::from_samples(taus.to_vec(), values)?
        .with_tag("experiment", "t1")
        .with_tag("gd_rate_per_s", gd_rate))
}
