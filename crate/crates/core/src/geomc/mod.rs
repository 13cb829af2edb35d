//! Dipolar coupling between sample spins in a channel and the NV detection volume.
//!
//! Geometry is in micrometres and converted to SI only where fields are formed.

pub mod dipole;
pub mod geometry;
pub mod mc;
pub mod quadrature;
pub mod sensitivity;
pub mod signmap;

pub use dipole::{box_field_tensor, dipolar_field};
pub use geometry::{sensing_volume, ChannelGeometry, SensorCylinder};
pub use mc::{
    ensemble_signal, per_average_signals, projected_mean_field, rms_ensemble_signal, EnsembleOptions, Estimate,
    McParams, SpinIntegration, Statistic,
};
pub use quadrature::{quadrature_signal, GridResolution};
pub use sensitivity::{default_depth_grid, sensitivity_curve, CurveOptions, CurvePoint, SensitivityCurve};
pub use signmap::{sign_map, SignMap};
