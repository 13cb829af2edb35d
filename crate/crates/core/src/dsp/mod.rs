//! Trace containers, spectra and curve fitting.

pub mod fit;
pub mod lm;
pub mod spectrum;
pub mod trace;

pub use fit::{
    fit_biexponential, fit_decaying_sinusoid, fit_lorentzian, fit_lorentzian_with, FitFlag, FitResult, LineShape,
};
pub use spectrum::{power_spectrum, PowerSpectrum, Window};
pub use trace::{Sampling, TimeTrace};

/// Chemical shift in ppm of an offset `delta_hz` from a carrier at `larmor_hz`.
pub fn hz_to_ppm(delta_hz: f64, larmor_hz: f64) -> f64 {
    delta_hz / larmor_hz * 1e6
}
