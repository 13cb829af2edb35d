use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::trace::TimeTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

/// One-sided power spectrum on bins `f0 + k df`.
///
/// Bins other than DC (and Nyquist for even lengths) carry the power of both
/// the positive and negative frequency so that, without a window, the bin sum
/// equals the sum of squared samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub f0: f64,
    pub df: f64,
    pub values: Vec<f64>,
}

impl PowerSpectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        self.f0 + bin as f64 * self.df
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.frequency(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Index of the largest bin, optionally ignoring DC.
    pub fn peak_bin(&self, skip_dc: bool) -> usize {
        let start = usize::from(skip_dc && self.values.len() > 1);
        let mut best = start;
        for k in start..self.values.len() {
            if self.values[k] > self.values[best] {
                best = k;
            }
        }
        best
    }

    pub fn peak_frequency(&self) -> f64 {
        self.frequency(self.peak_bin(true))
    }

    /// Bin whose centre is closest to `f`.
    pub fn bin_of(&self, f: f64) -> usize {
        let k = ((f - self.f0) / self.df).round().max(0.0) as usize;
        k.min(self.values.len().saturating_sub(1))
    }
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Complex DFT of `values` (times the window), unnormalised.
pub(crate) fn dft(values: &[f64], window: Window) -> Vec<Complex<f64>> {
    let n = values.len();
    let mut buf: Vec<Complex<f64>> = match window {
        Window::None => values.iter().map(|&v| Complex::new(v, 0.0)).collect(),
        Window::Hann => values
            .iter()
            .zip(hann(n))
            .map(|(&v, w)| Complex::new(v * w, 0.0))
            .collect(),
    };
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

/// Squared-magnitude DFT of a uniformly sampled trace.
pub fn power_spectrum(trace: &TimeTrace, window: Window) -> Result<PowerSpectrum> {
    let n = trace.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let dt = trace.dt().ok_or(Error::NonUniformSampling)?;
    let spec = dft(trace.values(), window);
    let half = n / 2;
    let scale = 1.0 / n as f64;
    let values = (0..=half)
        .map(|k| {
            let p = spec[k].norm_sqr() * scale;
            let mirrored = k != 0 && !(n.is_multiple_of(2) && k == half);
            if mirrored {
                2.0 * p
            } else {
                p
            }
        })
        .collect();
    Ok(PowerSpectrum {
        f0: 0.0,
        df: 1.0 / (n as f64 * dt),
        values,
    })
}
