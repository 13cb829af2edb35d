//! Pulse protocols run on the two-level NV model.

pub mod casr;
pub mod correlation;
pub mod rabi;
pub mod sequence;
pub mod t1;
pub mod xy8;

pub use casr::{alias_frequency, dnp_pump, run_casr, CasrSettings, DnpConfig, DnpOutcome};
pub use correlation::{default_correlation_grid, linear_grid, run_correlation, CorrelationOptions};
pub use rabi::{build_rabi, run_rabi, RabiOptions};
pub use sequence::{PulseElement, PulseSequence, ReadoutParams};
pub use t1::{default_t1_grid, gd_relaxation_rate, log_spaced, run_t1, GdSample, T1Decay};
pub use xy8::{filter_kernel, xy8_accumulated_phase, AcField, DecouplingBlock, FidModel};
