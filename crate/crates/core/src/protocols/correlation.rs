//! Correlation spectroscopy with two XY8 blocks separated by a swept delay.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::sequence::ReadoutParams;
use super::xy8::{DecouplingBlock, FidModel};
use crate::dsp::TimeTrace;
use crate::error::{invalid, Error, Result};
use crate::spin::{apply_rotation, BlochState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationOptions {
    /// Uniform samples of the signal phase averaged per point.
    pub phase_samples: usize,
    pub readout: ReadoutParams,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self {
            phase_samples: 128,
            readout: ReadoutParams::default(),
        }
    }
}

/// `n` points from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    let step = (stop - start) / (n.max(2) - 1) as f64;
    (0..n).map(|i| start + i as f64 * step).collect()
}

/// 2501 delays from 2 us to 502 us.
pub fn default_correlation_grid() -> Vec<f64> {
    linear_grid(2e-6, 502e-6, 2501)
}

/// `pi/2_x, phase phi, pi/2_-y`: stores `sin(phi)` in the population.
fn encode(state: BlochState, phi: f64) -> BlochState {
    let s = apply_rotation(state, Vector3::x(), FRAC_PI_2).expect("unit axis");
    let s = apply_rotation(s, Vector3::z(), phi).expect("unit axis");
    apply_rotation(s, -Vector3::y(), FRAC_PI_2).expect("unit axis")
}

/// Population after both blocks for one signal phase.
pub fn correlation_population(block: &DecouplingBlock, fid: &FidModel, t_corr: f64, signal_phase: f64) -> f64 {
    let phi1 = block.fid_phase(fid, 0.0, signal_phase);
    let phi2 = block.fid_phase(fid, block.duration() + t_corr, signal_phase);
    let stored = encode(BlochState::polarized(), phi1);
    // Coherences dephase during the correlation delay.
    let stored = BlochState::new(0.0, 0.0, stored.z);
    encode(stored, phi2).z
}

/// Correlation signal versus delay, averaged over the initial signal phase.
///
/// Values are normalized populations: `<sin(phi1) sin(phi2)>` over the phase samples.
pub fn run_correlation(
    t_corr_grid: &[f64],
    fid: &FidModel,
    block: &DecouplingBlock,
    options: &CorrelationOptions,
) -> Result<TimeTrace> {
    if t_corr_grid.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: t_corr_grid.len(),
        });
    }
    fid.validate()?;
    options.readout.validate()?;
    if options.phase_samples == 0 {
        return Err(invalid("phase_samples", "must be at least 1"));
    }
    let trace = TimeTrace::from_samples(t_corr_grid.to_vec(), vec![0.0; t_corr_grid.len()])?;
    if trace.dt().is_none() {
        return Err(Error::NonUniformSampling);
    }
    if t_corr_grid[0] < 0.0 {
        return Err(Error::NegativeDuration(t_corr_grid[0]));
    }
    let n_phase = options.phase_samples;
    let values: Vec<f64> = t_corr_grid
        .iter()
        .enumerate()
        .map(|(i, &tc)| {
            let z = (0..n_phase)
                .map(|j| correlation_population(block, fid, tc, 2.0 * PI * j as f64 / n_phase as f64))
                .sum::<f64>()
                / n_phase as f64;
            options.readout.population(z, i)
        })
        .collect();
    let mut out = TimeTrace::from_samples(t_corr_grid.to_vec(), values)?;
    out.metadata.insert("experiment".into(), "correlation".into());
    out.metadata
        .insert("block_duration_s".into(), block.duration().to_string());
    Ok(out)
}
