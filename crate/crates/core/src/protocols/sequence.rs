//! Pulse sequence elements and a Bloch-vector executor.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_non_negative, require_positive, Error, Result};
use crate::rng::{domain, task_rng};
use crate::spin::{evolve_free, population_from_fluorescence, readout_contrast, rotate, BlochState, RelaxationParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseElement {
    /// Optical pumping into |0>.
    LaserInit {
        duration: f64,
    },
    /// Resonant drive in the rotating frame. `phase` sets the rotation axis in
    /// the xy plane; a non-zero `detuning` tilts it towards +z.
    MicrowavePulse {
        rabi_frequency: f64,
        phase: f64,
        detuning: f64,
        duration: f64,
    },
    /// Free evolution at the given carrier detuning.
    Wait {
        duration: f64,
        detuning: f64,
    },
    Readout {
        duration: f64,
    },
    /// Radio-frequency pulse on the sample nuclei; the NV only relaxes.
    NuclearPiHalf {
        duration: f64,
    },
    /// Overhauser pump on the dissolved radical; the NV only relaxes.
    DnpPump {
        duration: f64,
    },
}

impl PulseElement {
    /// Resonant microwave pulse about the x axis.
    pub fn pulse_x(rabi_frequency: f64, duration: f64) -> Self {
        Self::MicrowavePulse {
            rabi_frequency,
            phase: 0.0,
            detuning: 0.0,
            duration,
        }
    }

    pub fn wait(duration: f64) -> Self {
        Self::Wait {
            duration,
            detuning: 0.0,
        }
    }

    pub fn duration(&self) -> f64 {
        match *self {
            Self::LaserInit { duration }
            | Self::MicrowavePulse { duration, .. }
            | Self::Wait { duration, .. }
            | Self::Readout { duration }
            | Self::NuclearPiHalf { duration }
            | Self::DnpPump { duration } => duration,
        }
    }

    fn validate(&self) -> Result<()> {
        require_non_negative("duration", self.duration())?;
        if let Self::MicrowavePulse {
            rabi_frequency,
            phase,
            detuning,
            ..
        } = *self
        {
            require_positive("rabi_frequency", rabi_frequency)?;
            if !phase.is_finite() || !detuning.is_finite() {
                return Err(invalid("microwave_pulse", "phase and detuning must be finite"));
            }
        }
        if let Self::Wait { detuning, .. } = *self {
            if !detuning.is_finite() {
                return Err(invalid("detuning", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Ordered elements repeated `repetitions` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    elements: Vec<PulseElement>,
    repetitions: usize,
}

impl PulseSequence {
    /// Each repetition unit must open with `LaserInit` and close with `Readout`.
    pub fn new(elements: Vec<PulseElement>, repetitions: usize) -> Result<Self> {
        if repetitions == 0 {
            return Err(invalid("repetitions", "must be at least 1"));
        }
        match (elements.first(), elements.last()) {
            (Some(PulseElement::LaserInit { .. }), Some(PulseElement::Readout { .. })) => {}
            (None, _) => return Err(Error::Empty("pulse sequence")),
            _ => {
                return Err(Error::InvalidSequence(
                    "must begin with laser_init and end with readout".into(),
                ))
            }
        }
        for e in &elements {
            e.validate()?;
        }
        Ok(Self { elements, repetitions })
    }

    pub fn elements(&self) -> &[PulseElement] {
        &self.elements
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    /// Length of one repetition unit.
    pub fn unit_duration(&self) -> f64 {
        self.elements.iter().map(PulseElement::duration).sum()
    }

    pub fn total_duration(&self) -> f64 {
        self.unit_duration() * self.repetitions as f64
    }

    /// Runs the sequence and returns the state at every `Readout`.
    ///
    /// Relaxation acts during waits and nuclear/DNP elements but not during
    /// microwave pulses. Readout itself does not disturb the state.
    pub fn execute(&self, relax: &RelaxationParams) -> Vec<BlochState> {
        let mut state = BlochState::mixed();
        let mut readouts = Vec::with_capacity(self.repetitions);
        for _ in 0..self.repetitions {
            for element in &self.elements {
                state = match *element {
                    PulseElement::LaserInit { .. } => BlochState::polarized(),
                    PulseElement::MicrowavePulse {
                        rabi_frequency,
                        phase,
                        detuning,
                        duration,
                    } => microwave_rotation(state, rabi_frequency, phase, detuning, duration),
                    PulseElement::Wait { duration, detuning } => {
                        evolve_free(state, detuning, duration, relax).expect("validated duration")
                    }
                    PulseElement::NuclearPiHalf { duration } | PulseElement::DnpPump { duration } => {
                        evolve_free(state, 0.0, duration, relax).expect("validated duration")
                    }
                    PulseElement::Readout { .. } => {
                        readouts.push(state);
                        state
                    }
                };
            }
        }
        readouts
    }
}

/// Rotation produced by a square pulse in the frame rotating at the drive.
pub(crate) fn microwave_rotation(
    state: BlochState,
    rabi_frequency: f64,
    phase: f64,
    detuning: f64,
    duration: f64,
) -> BlochState {
    let (s, c) = phase.sin_cos();
    let field = Vector3::new(rabi_frequency * c, rabi_frequency * s, detuning);
    let effective = field.norm();
    let axis = field / effective;
    let angle = 2.0 * PI * effective * duration;
    BlochState::from_vector(rotate(state.as_vector(), &axis, angle))
}

/// Optical readout: fluorescence model plus optional Gaussian shot noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    pub contrast: f64,
    pub baseline: f64,
    /// Single-shot noise standard deviation in fluorescence units.
    pub noise_sigma: f64,
    /// Number of averaged repetitions per point; noise scales as 1/sqrt of it.
    pub averaging: u64,
    pub seed: u64,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        Self {
            contrast: 0.3,
            baseline: 1.0,
            noise_sigma: 0.0,
            averaging: 1,
            seed: 0,
        }
    }
}

impl ReadoutParams {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(invalid(
                "contrast",
                format!("must lie in (0, 1], got {}", self.contrast),
            ));
        }
        require_positive("baseline", self.baseline)?;
        require_non_negative("noise_sigma", self.noise_sigma)?;
        if self.averaging == 0 {
            return Err(invalid("averaging", "must be at least 1"));
        }
        Ok(())
    }

    /// Standard deviation of one averaged point.
    pub fn point_sigma(&self) -> f64 {
        self.noise_sigma / (self.averaging as f64).sqrt()
    }

    /// Averaged fluorescence for point `index` of a trace.
    pub fn fluorescence(&self, z: f64, index: usize) -> f64 {
        let clean = readout_contrast(BlochState::new(0.0, 0.0, z), self.contrast, self.baseline);
        let sigma = self.point_sigma();
        if sigma == 0.0 {
            return clean;
        }
        let mut rng = task_rng(self.seed, &[domain::READOUT_NOISE, index as u64]);
        clean + Normal::new(0.0, sigma).expect("finite sigma").sample(&mut rng)
    }

    /// Population `z` inferred from the noisy fluorescence of point `index`.
    pub fn population(&self, z: f64, index: usize) -> f64 {
        population_from_fluorescence(self.fluorescence(z, index), self.contrast, self.baseline)
    }
}
