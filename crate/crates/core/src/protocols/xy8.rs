//! XY8 dynamical decoupling as a phase filter for oscillating fields.

use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_positive, Error, Result};

/// Monochromatic field `amplitude cos(2 pi frequency t + phase)` along the NV axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcField {
    /// Tesla.
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// Free induction decay of the sample magnetization as seen by the NV.
///
/// The field is `amplitude * sum_k w_k cos(2 pi (larmor + offset_k) t + phase0) exp(-t / decay_time)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidModel {
    pub larmor: f64,
    /// `(offset Hz, weight)` pairs; a single `(0, 1)` line when unsplit.
    pub line_splittings: Vec<(f64, f64)>,
    /// T2* of the nuclear signal (s).
    pub decay_time: f64,
    /// Tesla at the NV.
    pub amplitude: f64,
    pub phase0: f64,
}

impl FidModel {
    pub fn new(
        larmor: f64,
        line_splittings: Vec<(f64, f64)>,
        decay_time: f64,
        amplitude: f64,
        phase0: f64,
    ) -> Result<Self> {
        let fid = Self {
            larmor,
            line_splittings,
            decay_time,
            amplitude,
            phase0,
        };
        fid.validate()?;
        Ok(fid)
    }

    /// Single unsplit line.
    pub fn singlet(larmor: f64, decay_time: f64, amplitude: f64) -> Result<Self> {
        Self::new(larmor, vec![(0.0, 1.0)], decay_time, amplitude, 0.0)
    }

    /// Symmetric doublet with lines at `larmor +- splitting / 2`.
    pub fn doublet(larmor: f64, splitting: f64, decay_time: f64, amplitude: f64) -> Result<Self> {
        Self::new(
            larmor,
            vec![(-0.5 * splitting, 0.5), (0.5 * splitting, 0.5)],
            decay_time,
            amplitude,
            0.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("larmor", self.larmor)?;
        require_positive("decay_time", self.decay_time)?;
        if !self.amplitude.is_finite() || !self.phase0.is_finite() {
            return Err(invalid("amplitude", "amplitude and phase0 must be finite"));
        }
        if self.line_splittings.is_empty() {
            return Err(Error::Empty("line_splittings"));
        }
        if self.line_splittings.iter().any(|(f, w)| !(*w > 0.0) || !f.is_finite()) {
            return Err(invalid("line_splittings", "weights must be positive"));
        }
        let total: f64 = self.line_splittings.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "line_splittings",
                format!("weights must sum to 1, got {total}"),
            ));
        }
        Ok(())
    }

    /// `(frequency, amplitude)` of every line at time zero.
    pub fn lines(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.line_splittings
            .iter()
            .map(|&(offset, w)| (self.larmor + offset, self.amplitude * w))
    }

    pub fn envelope(&self, t: f64) -> f64 {
        (-t / self.decay_time).exp()
    }

    /// Field at time `t` with an extra phase offset.
    pub fn field(&self, t: f64, extra_phase: f64) -> f64 {
        let env = self.envelope(t);
        self.lines()
            .map(|(f, a)| a * (2.0 * PI * f * t + self.phase0 + extra_phase).cos())
            .sum::<f64>()
            * env
    }
}

fn check_block(tau: f64, n_pulses: usize) -> Result<()> {
    require_positive("tau_interpulse", tau)?;
    if n_pulses == 0 || !n_pulses.is_multiple_of(8) {
        return Err(Error::PulseCountNotMultipleOf8(n_pulses));
    }
    Ok(())
}

/// `sum_k s_k int e^{i 2 pi f t} dt` over the toggling segments of a CPMG-type block.
///
/// The toggling sign starts at +1 and flips at `(k - 1/2) tau` for each of the
/// `n_pulses` pulses; the block lasts `n_pulses * tau`.
pub fn filter_kernel(frequency: f64, tau: f64, n_pulses: usize) -> Complex<f64> {
    let w = 2.0 * PI * frequency;
    let mut edges = Vec::with_capacity(n_pulses + 2);
    edges.push(0.0);
    edges.extend((1..=n_pulses).map(|k| (k as f64 - 0.5) * tau));
    edges.push(n_pulses as f64 * tau);
    let mut sign = 1.0;
    let mut acc = Complex::new(0.0, 0.0);
    for seg in edges.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let integral = if w == 0.0 || (w * (b - a)).abs() < 1e-9 {
            // Midpoint value is exact to O((w dt)^2) for tiny segments.
            Complex::from_polar(b - a, w * 0.5 * (a + b))
        } else {
            (Complex::from_polar(1.0, w * b) - Complex::from_polar(1.0, w * a)) / Complex::new(0.0, w)
        };
        acc += sign * integral;
        sign = -sign;
    }
    acc
}

/// Phase picked up by the NV coherence during one XY8 block.
///
/// `gamma_nv` in Hz/T; the returned phase is `2 pi gamma_nv int s(t) B(t) dt`.
pub fn xy8_accumulated_phase(field: &AcField, tau: f64, n_pulses: usize, gamma_nv: f64) -> Result<f64> {
    check_block(tau, n_pulses)?;
    require_positive("gamma_nv", gamma_nv)?;
    let k = filter_kernel(field.frequency, tau, n_pulses);
    Ok(2.0 * PI * gamma_nv * field.amplitude * (Complex::from_polar(1.0, field.phase) * k).re)
}

/// XY8 block parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingBlock {
    pub tau: f64,
    pub n_pulses: usize,
    /// NV gyromagnetic ratio, Hz/T.
    pub gamma_nv: f64,
}

impl DecouplingBlock {
    pub fn new(tau: f64, n_pulses: usize, gamma_nv: f64) -> Result<Self> {
        check_block(tau, n_pulses)?;
        require_positive("gamma_nv", gamma_nv)?;
        Ok(Self {
            tau,
            n_pulses,
            gamma_nv,
        })
    }

    /// Block tuned to `frequency`: `tau = 1 / (2 frequency)`.
    pub fn resonant(frequency: f64, n_pulses: usize, gamma_nv: f64) -> Result<Self> {
        require_positive("frequency", frequency)?;
        Self::new(0.5 / frequency, n_pulses, gamma_nv)
    }

    pub fn duration(&self) -> f64 {
        self.tau * self.n_pulses as f64
    }

    /// Phase from a decaying FID for a block starting at `start`.
    ///
    /// The FID envelope is taken as constant over the block.
    pub fn fid_phase(&self, fid: &FidModel, start: f64, extra_phase: f64) -> f64 {
        let env = fid.envelope(start);
        let sum: f64 = fid
            .lines()
            .map(|(f, a)| {
                let k = filter_kernel(f, self.tau, self.n_pulses);
                let phase = 2.0 * PI * f * start + fid.phase0 + extra_phase;
                a * (Complex::from_polar(1.0, phase) * k).re
            })
            .sum();
        2.0 * PI * self.gamma_nv * env * sum
    }
}
