//! NV two-level spin model.
//!
//! Only the driven |0> <-> |-1> subspace is modelled. States live on or inside
//! the Bloch sphere with `z = +1` the optically polarized, bright |0> state.
//! Positive rotation angles follow the right-hand rule about the rotation axis.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicsConstants;
use crate::error::{invalid, require_non_negative, Error, Result};

const UNIT_TOLERANCE: f64 = 1e-12;

/// Static bias field, assumed aligned with the NV symmetry axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticBias {
    magnitude: f64,
    axis: Vector3<f64>,
}

impl MagneticBias {
    pub fn new(magnitude: f64, axis: Vector3<f64>) -> Result<Self> {
        require_non_negative("magnitude_b0", magnitude)?;
        check_unit(&axis)?;
        Ok(Self { magnitude, axis })
    }

    /// Field of the given magnitude along the lab z axis.
    pub fn along_z(magnitude: f64) -> Result<Self> {
        Self::new(magnitude, Vector3::z())
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochState {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// The optically pumped |0> state.
    pub const fn polarized() -> Self {
        Self::new(0.0, 0.0, 1.0)
    }

    pub const fn mixed() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn is_physical(&self) -> bool {
        self.norm() <= 1.0 + 1e-9
    }
}

impl Default for BlochState {
    fn default() -> Self {
        Self::polarized()
    }
}

/// Longitudinal and transverse relaxation rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationParams {
    /// 1/T1 (1/s).
    pub gamma1: f64,
    /// 1/T2 (1/s).
    pub gamma2: f64,
    pub equilibrium_z: f64,
}

impl RelaxationParams {
    pub fn new(gamma1: f64, gamma2: f64, equilibrium_z: f64) -> Result<Self> {
        require_non_negative("gamma1", gamma1)?;
        require_non_negative("gamma2", gamma2)?;
        if gamma2 < gamma1 / 2.0 {
            return Err(invalid(
                "gamma2",
                format!("must be at least gamma1/2 = {}, got {gamma2}", gamma1 / 2.0),
            ));
        }
        if !(-1.0..=1.0).contains(&equilibrium_z) {
            return Err(invalid(
                "equilibrium_z",
                format!("must lie in [-1, 1], got {equilibrium_z}"),
            ));
        }
        Ok(Self {
            gamma1,
            gamma2,
            equilibrium_z,
        })
    }

    /// No relaxation at all.
    pub const fn none() -> Self {
        Self {
            gamma1: 0.0,
            gamma2: 0.0,
            equilibrium_z: 0.0,
        }
    }

    /// Pure T1 decay towards the fully mixed state, with T2 = 2 T1.
    pub fn longitudinal(gamma1: f64) -> Result<Self> {
        Self::new(gamma1, gamma1 / 2.0, 0.0)
    }
}

impl Default for RelaxationParams {
    fn default() -> Self {
        Self::none()
    }
}

fn check_unit(axis: &Vector3<f64>) -> Result<()> {
    let n = axis.norm();
    if (n - 1.0).abs() > UNIT_TOLERANCE || !n.is_finite() {
        return Err(Error::NonUnitAxis(n));
    }
    Ok(())
}

/// Frequency of the |0> -> |-1> transition, D - gamma_e * B0.
pub fn nv_transition_frequency(constants: &PhysicsConstants, bias: &MagneticBias) -> Result<f64> {
    let limit = constants.anticrossing_field();
    if bias.magnitude() >= limit {
        return Err(Error::BeyondAnticrossing {
            b0: bias.magnitude(),
            limit,
        });
    }
    Ok(constants.zero_field_splitting - constants.gamma_electron * bias.magnitude())
}

/// gamma * B0, with gamma in Hz/T.
pub fn larmor_frequency(gamma: f64, b0: f64) -> f64 {
    gamma * b0
}

/// Rotates the Bloch vector about `axis` by `angle` (Rodrigues' formula).
pub fn apply_rotation(state: BlochState, axis: Vector3<f64>, angle: f64) -> Result<BlochState> {
    check_unit(&axis)?;
    Ok(BlochState::from_vector(rotate(state.as_vector(), &axis, angle)))
}

pub(crate) fn rotate(v: Vector3<f64>, k: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (s, c) = angle.sin_cos();
    v * c + k.cross(&v) * s + k * (k.dot(&v) * (1.0 - c))
}

/// Free precession at `detuning` (Hz) for `tau` seconds with relaxation.
///
/// The transverse components rotate by `2 pi detuning tau` about +z and decay
/// with `gamma2`; `z` relaxes towards `equilibrium_z` with `gamma1`.
pub fn evolve_free(state: BlochState, detuning: f64, tau: f64, relax: &RelaxationParams) -> Result<BlochState> {
    if !(tau >= 0.0) {
        return Err(Error::NegativeDuration(tau));
    }
    let (s, c) = (2.0 * PI * detuning * tau).sin_cos();
    let transverse = (-relax.gamma2 * tau).exp();
    let longitudinal = (-relax.gamma1 * tau).exp();
    Ok(BlochState {
        x: transverse * (state.x * c - state.y * s),
        y: transverse * (state.x * s + state.y * c),
        z: relax.equilibrium_z + (state.z - relax.equilibrium_z) * longitudinal,
    })
}

/// Spin-dependent fluorescence, `baseline * (1 - c (1 - z) / 2)`.
pub fn readout_contrast(state: BlochState, contrast: f64, baseline: f64) -> f64 {
    baseline * (1.0 - contrast * (1.0 - state.z) / 2.0)
}

/// Inverse of [`readout_contrast`] for a given fluorescence level.
pub fn population_from_fluorescence(fluorescence: f64, contrast: f64, baseline: f64) -> f64 {
    1.0 - 2.0 * (1.0 - fluorescence / baseline) / contrast
}
