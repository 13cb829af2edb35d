//! Desk-scale simulator for NV-center quantum sensing inside a microfluidic chip.
//!
//! The crate is split along the physics:
//!
//! * [`spin`] holds the NV two-level model (Larmor arithmetic, Bloch rotations,
//!   free evolution with relaxation, fluorescence readout).
//! * [`protocols`] builds and runs the Rabi, T1 relaxometry, XY8 correlation
//!   spectroscopy and CASR NMR experiments on top of that model.
//! * [`geomc`] integrates dipolar fields from sample spins in a channel onto the
//!   optically excited NV cylinder and produces the layer-thickness sensitivity curve.
//! * [`dsp`] turns traces into spectra and fits them.
//!
//! Units are SI, except that [`geomc`] lengths are in micrometres.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod dsp;
pub mod error;
pub mod geomc;
pub mod protocols;
pub mod rng;
pub mod spin;

pub use constants::{Nucleus, PhysicsConstants};
pub use error::{Error, Result};
