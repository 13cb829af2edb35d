//! Curve fits used on simulated and recorded traces.
//!
//! All fits run the damped least-squares solver in [`super::lm`] from initial
//! guesses derived from the data: spectral peak-picking for frequencies, trace
//! extrema for amplitudes and a coarse rate scan for exponentials.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, residual_sum, LmConfig, LmFit, Model};
use super::spectrum::{dft, PowerSpectrum, Window};
use super::trace::TimeTrace;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// Oscillation amplitude is indistinguishable from zero.
    FrequencyUnconstrained,
    /// The two exponential components cannot be separated.
    Degenerate,
    /// The trace carries no variation at all.
    Flat,
    /// A fitted line is not significant against the spectral baseline.
    PeakNotFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: BTreeMap<String, f64>,
    pub uncertainties: BTreeMap<String, f64>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub converged: bool,
    pub flags: BTreeSet<FitFlag>,
}

impl FitResult {
    fn new(names: &[&str], values: &[f64], sigmas: &[f64], rss: f64, converged: bool) -> Self {
        Self {
            parameters: names
                .iter()
                .map(|n| n.to_string())
                .zip(values.iter().copied())
                .collect(),
            uncertainties: names
                .iter()
                .map(|n| n.to_string())
                .zip(sigmas.iter().copied())
                .collect(),
            residual_norm: rss.max(0.0).sqrt(),
            converged,
            flags: BTreeSet::new(),
        }
    }

    /// Fitted value of `name`; panics on unknown names.
    pub fn param(&self, name: &str) -> f64 {
        match self.parameters.get(name) {
            Some(v) => *v,
            None => panic!("fit has no parameter `{name}`"),
        }
    }

    pub fn uncertainty(&self, name: &str) -> f64 {
        self.uncertainties.get(name).copied().unwrap_or(f64::INFINITY)
    }

    pub fn has(&self, flag: FitFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// `A cos(2 pi f t + phi) exp(-rate t) + C`, parameters `[A, f, phi, rate, C]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DecayingSinusoid;

impl Model for DecayingSinusoid {
    fn n_params(&self) -> usize {
        5
    }

    fn value(&self, t: f64, p: &[f64]) -> f64 {
        p[0] * (2.0 * PI * p[1] * t + p[2]).cos() * (-p[3] * t).exp() + p[4]
    }

    fn gradient(&self, t: f64, p: &[f64], g: &mut [f64]) {
        let (s, c) = (2.0 * PI * p[1] * t + p[2]).sin_cos();
        let e = (-p[3] * t).exp();
        g[0] = c * e;
        g[1] = -p[0] * s * e * 2.0 * PI * t;
        g[2] = -p[0] * s * e;
        g[3] = -t * p[0] * c * e;
        g[4] = 1.0;
    }
}

/// `A1 exp(-ra t) + A2 exp(-rb t) + C`, parameters `[A1, ra, A2, rb, C]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Biexponential;

impl Model for Biexponential {
    fn n_params(&self) -> usize {
        5
    }

    fn value(&self, t: f64, p: &[f64]) -> f64 {
        p[0] * (-p[1] * t).exp() + p[2] * (-p[3] * t).exp() + p[4]
    }

    fn gradient(&self, t: f64, p: &[f64], g: &mut [f64]) {
        let ea = (-p[1] * t).exp();
        let eb = (-p[3] * t).exp();
        g[0] = ea;
        g[1] = -t * p[0] * ea;
        g[2] = eb;
        g[3] = -t * p[2] * eb;
        g[4] = 1.0;
    }
}

/// `A exp(-r t) + C`, parameters `[A, r, C]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SingleExponential;

impl Model for SingleExponential {
    fn n_params(&self) -> usize {
        3
    }

    fn value(&self, t: f64, p: &[f64]) -> f64 {
        p[0] * (-p[1] * t).exp() + p[2]
    }

    fn gradient(&self, t: f64, p: &[f64], g: &mut [f64]) {
        let e = (-p[1] * t).exp();
        g[0] = e;
        g[1] = -t * p[0] * e;
        g[2] = 1.0;
    }
}

/// Sum of Lorentzian lines plus a constant baseline.
///
/// Each line is `a (w/2)^2 / ((f - f0)^2 + (w/2)^2)` with parameters
/// `[f0, w, a]`; the baseline is the last parameter.
#[derive(Debug, Clone, Copy)]
pub struct LorentzianLines {
    pub n_peaks: usize,
}

impl Model for LorentzianLines {
    fn n_params(&self) -> usize {
        3 * self.n_peaks + 1
    }

    fn value(&self, f: f64, p: &[f64]) -> f64 {
        let mut v = p[3 * self.n_peaks];
        for line in p[..3 * self.n_peaks].chunks_exact(3) {
            let h = 0.5 * line[1];
            let d = f - line[0];
            v += line[2] * h * h / (d * d + h * h);
        }
        v
    }

    fn gradient(&self, f: f64, p: &[f64], g: &mut [f64]) {
        for (k, line) in p[..3 * self.n_peaks].chunks_exact(3).enumerate() {
            let h = 0.5 * line[1];
            let d = f - line[0];
            let den = d * d + h * h;
            let a = line[2];
            g[3 * k] = a * h * h * 2.0 * d / (den * den);
            g[3 * k + 1] = a * h * d * d / (den * den);
            g[3 * k + 2] = h * h / den;
        }
        g[3 * self.n_peaks] = 1.0;
    }
}

fn is_flat(values: &[f64]) -> bool {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    spread <= 1e-12 * mean.abs() || spread == 0.0
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn complex_projection(times: &[f64], values: &[f64], f: f64) -> Complex<f64> {
    times
        .iter()
        .zip(values)
        .map(|(&t, &v)| Complex::from_polar(v, -2.0 * PI * f * t))
        .sum()
}

/// Fits `A cos(2 pi f t + phi) exp(-t / tau) + C` to a uniformly sampled trace.
///
/// Reports `amplitude`, `frequency`, `phase`, `decay_time` (infinite when no
/// decay is resolved), `decay_rate` and `offset`.
pub fn fit_decaying_sinusoid(trace: &TimeTrace) -> Result<FitResult> {
    let n = trace.len();
    if n < 8 {
        return Err(Error::TooFewSamples { needed: 8, got: n });
    }
    let dt = trace.dt().ok_or(Error::NonUniformSampling)?;
    let names = ["amplitude", "frequency", "phase", "decay_time", "decay_rate", "offset"];
    let times = trace.times();
    let values = trace.values();
    let offset = trace.mean();

    if is_flat(values) {
        let mut fit = FitResult::new(
            &names,
            &[0.0, 0.0, 0.0, f64::INFINITY, 0.0, offset],
            &[0.0, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY, 0.0],
            0.0,
            true,
        );
        fit.flags.insert(FitFlag::FrequencyUnconstrained);
        fit.flags.insert(FitFlag::Flat);
        return Ok(fit);
    }

    // Frequency guess from a zero-padded spectrum of the centred trace.
    let centred: Vec<f64> = values.iter().map(|v| v - offset).collect();
    let padded_len = (8 * n).next_power_of_two();
    let mut padded = centred.clone();
    padded.resize(padded_len, 0.0);
    let spec = dft(&padded, Window::None);
    let half = padded_len / 2;
    let mags: Vec<f64> = spec[..=half].iter().map(|c| c.norm()).collect();
    let mut k = 1;
    for i in 1..=half {
        if mags[i] > mags[k] {
            k = i;
        }
    }
    let mut kf = k as f64;
    if k > 0 && k < half {
        let (a, b, c) = (mags[k - 1], mags[k], mags[k + 1]);
        let den = a - 2.0 * b + c;
        if den.abs() > 0.0 {
            kf += 0.5 * (a - c) / den;
        }
    }
    let f0 = kf / (padded_len as f64 * dt);

    let proj = complex_projection(&times, &centred, f0);
    let phi0 = proj.arg();
    let amp0 = 2.0 * proj.norm() / n as f64;
    let mid = n / 2;
    let first = complex_projection(&times[..mid], &centred[..mid], f0).norm();
    let second = complex_projection(&times[mid..], &centred[mid..], f0).norm();
    let span = times[n - 1] - times[0];
    let rate0 = if second > 0.0 && first > second {
        (first / second).ln() / (0.5 * span)
    } else {
        0.0
    };

    let cfg = LmConfig::default();
    let model = DecayingSinusoid;
    let mut best: Option<LmFit> = None;
    for &rate in &[rate0, 0.0] {
        let amp = amp0 * (1.0 + rate * 0.5 * span).max(1.0);
        let fit = levenberg_marquardt(&model, &times, values, &[amp, f0, phi0, rate, offset], &cfg);
        if best.as_ref().is_none_or(|b| fit.rss < b.rss) {
            best = Some(fit);
        }
    }
    let fit = best.expect("at least one start");
    let sig = fit.uncertainties();
    let mut p = fit.params.clone();
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[2] += PI;
    }
    p[2] = wrap_phase(p[2]);
    let decay_time = if p[3] > 0.0 { 1.0 / p[3] } else { f64::INFINITY };
    let decay_time_sigma = if p[3] > 0.0 {
        sig[3] / (p[3] * p[3])
    } else {
        f64::INFINITY
    };

    let mut result = FitResult::new(
        &names,
        &[p[0], p[1].abs(), p[2], decay_time, p[3], p[4]],
        &[sig[0], sig[1], sig[2], decay_time_sigma, sig[3], sig[4]],
        fit.rss,
        fit.converged,
    );
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(p[0] > 3.0 * sig[0]) || p[0] <= 1e-12 * scale {
        result.flags.insert(FitFlag::FrequencyUnconstrained);
    }
    Ok(result)
}

/// Linear least squares for `A1 e^{-ra t} + A2 e^{-rb t} + C` at fixed rates.
fn biexp_linear(times: &[f64], values: &[f64], ra: f64, rb: f64) -> Option<(Vector3<f64>, f64)> {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&t, &y) in times.iter().zip(values) {
        let row = Vector3::new((-ra * t).exp(), (-rb * t).exp(), 1.0);
        ata += row * row.transpose();
        aty += row * y;
    }
    let coef = ata.try_inverse()? * aty;
    let rss = times
        .iter()
        .zip(values)
        .map(|(&t, &y)| {
            let r = y - coef[0] * (-ra * t).exp() - coef[1] * (-rb * t).exp() - coef[2];
            r * r
        })
        .sum();
    Some((coef, rss))
}

fn single_linear(times: &[f64], values: &[f64], rate: f64) -> Option<(f64, f64, f64)> {
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in times.iter().zip(values) {
        let e = (-rate * t).exp();
        s11 += e * e;
        s12 += e;
        s22 += 1.0;
        b1 += e * y;
        b2 += y;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-14 * s11 * s22 {
        return None;
    }
    let a = (b1 * s22 - b2 * s12) / det;
    let c = (s11 * b2 - s12 * b1) / det;
    let rss = residual_sum(&SingleExponential, times, values, &[a, rate, c]);
    Some((a, c, rss))
}

fn rate_grid(times: &[f64], points: usize) -> Vec<f64> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let t_min = times
        .iter()
        .copied()
        .filter(|t| *t > 0.0)
        .fold(f64::INFINITY, f64::min)
        .min(t_max);
    let lo = (0.1 / t_max).ln();
    let hi = (10.0 / t_min).ln();
    (0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Fits `A1 exp(-ra t) + A2 exp(-rb t) + C` with `ra >= rb`.
///
/// Besides `a1`, `rate_a`, `a2`, `rate_b` and `offset`, the result carries a
/// `combined_rate`: the single-exponential rate when the two components are
/// degenerate, otherwise the amplitude-weighted mean rate.
pub fn fit_biexponential(trace: &TimeTrace) -> Result<FitResult> {
    let n = trace.len();
    if n < 6 {
        return Err(Error::TooFewSamples { needed: 6, got: n });
    }
    let names = ["a1", "rate_a", "a2", "rate_b", "offset", "combined_rate"];
    let times = trace.times();
    let values = trace.values();
    let mean = trace.mean();
    if is_flat(values) {
        let mut fit = FitResult::new(
            &names,
            &[0.0, 0.0, 0.0, 0.0, mean, 0.0],
            &[0.0, f64::INFINITY, 0.0, f64::INFINITY, 0.0, f64::INFINITY],
            0.0,
            true,
        );
        fit.flags.insert(FitFlag::Flat);
        fit.flags.insert(FitFlag::Degenerate);
        return Ok(fit);
    }

    let grid = rate_grid(&times, 48);
    let cfg = LmConfig::default();

    // Single-exponential reference fit.
    let mut single_start = None;
    for &r in &grid {
        if let Some((a, c, rss)) = single_linear(&times, values, r) {
            if single_start.is_none_or(|(_, _, _, best)| rss < best) {
                single_start = Some((a, r, c, rss));
            }
        }
    }
    let (a, r, c, _) = single_start.ok_or_else(|| invalid("trace", "no exponential trend"))?;
    let single = levenberg_marquardt(&SingleExponential, &times, values, &[a, r, c], &cfg);

    let mut start = None;
    for (i, &ra) in grid.iter().enumerate() {
        for &rb in &grid[..i] {
            if let Some((coef, rss)) = biexp_linear(&times, values, ra, rb) {
                if start.as_ref().is_none_or(|(_, best)| rss < *best) {
                    start = Some(([coef[0], ra, coef[1], rb, coef[2]], rss));
                }
            }
        }
    }
    let double = match start {
        Some((p0, _)) => levenberg_marquardt(&Biexponential, &times, values, &p0, &cfg),
        None => single_as_double(&single),
    };

    let ss_tot: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let mut p = double.params.clone();
    let mut sig = double.uncertainties();
    if p[1] < p[3] {
        p.swap(0, 2);
        p.swap(1, 3);
        sig.swap(0, 2);
        sig.swap(1, 3);
    }
    let dof = (n - 5) as f64;
    let f_stat = if double.rss > 0.0 {
        ((single.rss - double.rss) / 2.0) / (double.rss / dof)
    } else {
        f64::INFINITY
    };
    let single_exact = single.rss <= 1e-20 * ss_tot;
    let close_rates = (p[1] - p[3]).abs() <= 0.05 * p[1].abs();
    let weak_component = p[0].abs().min(p[2].abs()) < 1e-3 * (p[0].abs() + p[2].abs());
    let degenerate =
        single_exact || f_stat < 10.0 || close_rates || weak_component || !double.converged && single.converged;

    let mut result = if degenerate {
        let s = single.uncertainties();
        let q = &single.params;
        let mut fit = FitResult::new(
            &names,
            &[q[0], q[1], 0.0, q[1], q[2], q[1]],
            &[s[0], s[1], 0.0, s[1], s[2], s[1]],
            single.rss,
            single.converged,
        );
        fit.flags.insert(FitFlag::Degenerate);
        fit
    } else {
        let combined = (p[0] * p[1] + p[2] * p[3]) / (p[0] + p[2]);
        FitResult::new(
            &names,
            &[p[0], p[1], p[2], p[3], p[4], combined],
            &[sig[0], sig[1], sig[2], sig[3], sig[4], f64::NAN],
            double.rss,
            double.converged,
        )
    };
    if let Some(u) = result.uncertainties.get_mut("combined_rate") {
        if u.is_nan() {
            *u = f64::INFINITY;
        }
    }
    Ok(result)
}

fn single_as_double(single: &LmFit) -> LmFit {
    let q = &single.params;
    LmFit {
        params: vec![q[0], q[1], 0.0, q[1], q[2]],
        covariance: None,
        rss: single.rss,
        iterations: single.iterations,
        converged: false,
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Half-maximum width (in bins) around `peak`, at least one bin.
fn half_width_bins(values: &[f64], peak: usize, baseline: f64) -> usize {
    let half = baseline + 0.5 * (values[peak] - baseline);
    let mut lo = peak;
    while lo > 0 && values[lo] > half {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < values.len() && values[hi] > half {
        hi += 1;
    }
    (hi - lo).max(1)
}

/// How neighbouring lines combine in a power spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineShape {
    /// Lorentzian power lines added independently.
    #[default]
    Lorentzian,
    /// Power of a coherent sum of complex Lorentzian amplitudes with a free
    /// relative phase, for lines that share one free induction decay.
    Coherent,
}

/// `|sum_k s_k h_k e^{i psi_k} / (h_k + i (f - f_k))|^2 + baseline` with `h = w / 2`.
///
/// Parameters are `[f0, w, s]` per line, then one relative phase for every
/// line after the first, then the baseline. An isolated line is a Lorentzian
/// of height `s^2` and FWHM `w`.
#[derive(Debug, Clone, Copy)]
pub struct CoherentLines {
    pub n_peaks: usize,
}

impl CoherentLines {
    fn line(&self, f: f64, p: &[f64], k: usize) -> (Complex<f64>, Complex<f64>) {
        let h = 0.5 * p[3 * k + 1];
        let rot = if k == 0 {
            Complex::new(1.0, 0.0)
        } else {
            Complex::from_polar(1.0, p[3 * self.n_peaks + k - 1])
        };
        let den = Complex::new(h, f - p[3 * k]);
        (rot, den)
    }

    fn amplitude(&self, f: f64, p: &[f64]) -> Complex<f64> {
        (0..self.n_peaks)
            .map(|k| {
                let (rot, den) = self.line(f, p, k);
                rot * (p[3 * k + 2] * 0.5 * p[3 * k + 1]) / den
            })
            .sum()
    }
}

impl Model for CoherentLines {
    fn n_params(&self) -> usize {
        4 * self.n_peaks
    }

    fn value(&self, f: f64, p: &[f64]) -> f64 {
        self.amplitude(f, p).norm_sqr() + p[4 * self.n_peaks - 1]
    }

    fn gradient(&self, f: f64, p: &[f64], g: &mut [f64]) {
        let total = self.amplitude(f, p).conj();
        let i = Complex::new(0.0, 1.0);
        for k in 0..self.n_peaks {
            let (rot, den) = self.line(f, p, k);
            let (h, s) = (0.5 * p[3 * k + 1], p[3 * k + 2]);
            let z = rot * (s * h) / den;
            let d_center = rot * (s * h) * i / (den * den);
            let d_width = rot * (0.5 * s) * i * (f - p[3 * k]) / (den * den);
            let d_scale = rot * h / den;
            g[3 * k] = 2.0 * (total * d_center).re;
            g[3 * k + 1] = 2.0 * (total * d_width).re;
            g[3 * k + 2] = 2.0 * (total * d_scale).re;
            if k > 0 {
                g[3 * self.n_peaks + k - 1] = 2.0 * (total * i * z).re;
            }
        }
        g[4 * self.n_peaks - 1] = 1.0;
    }
}

/// Fits one or two Lorentzian lines plus a constant baseline to a spectrum.
///
/// The DC bin is excluded. Parameters are `center_k`, `fwhm_k`, `amplitude_k`
/// (k = 1, 2 with centres ascending) and `baseline`.
pub fn fit_lorentzian(spectrum: &PowerSpectrum, n_peaks: usize) -> Result<FitResult> {
    fit_lorentzian_with(spectrum, n_peaks, LineShape::Lorentzian)
}

/// [`fit_lorentzian`] with a choice of line combination. Coherent doublets
/// also report `relative_phase_2`.
pub fn fit_lorentzian_with(spectrum: &PowerSpectrum, n_peaks: usize, shape: LineShape) -> Result<FitResult> {
    if !(1..=2).contains(&n_peaks) {
        return Err(invalid("n_peaks", format!("must be 1 or 2, got {n_peaks}")));
    }
    if spectrum.len() < 16 {
        return Err(Error::TooFewSamples {
            needed: 16,
            got: spectrum.len(),
        });
    }
    let freqs: Vec<f64> = spectrum.frequencies()[1..].to_vec();
    let values: Vec<f64> = spectrum.values[1..].to_vec();
    let df = spectrum.df;
    let baseline = median(&values);

    let mut lines0 = Vec::with_capacity(n_peaks);
    let mut masked = values.clone();
    for _ in 0..n_peaks {
        let mut k = 0;
        for i in 0..masked.len() {
            if masked[i] > masked[k] {
                k = i;
            }
        }
        let w_bins = half_width_bins(&values, k, baseline);
        let amp = (values[k] - baseline).max(0.0);
        lines0.push([freqs[k], w_bins as f64 * df, amp]);
        let guard = (w_bins as f64 * 1.5).ceil().max(2.0) as usize;
        let lo = k.saturating_sub(guard);
        let hi = (k + guard + 1).min(masked.len());
        for v in &mut masked[lo..hi] {
            *v = f64::NEG_INFINITY;
        }
    }

    let cfg = LmConfig::default();
    // (fit, per-line [center, fwhm, height] with sigmas, relative phase)
    let (fit, raw_lines, phase) = match shape {
        LineShape::Lorentzian => {
            let mut starts: Vec<f64> = lines0.iter().flatten().copied().collect();
            starts.push(baseline);
            let fit = levenberg_marquardt(&LorentzianLines { n_peaks }, &freqs, &values, &starts, &cfg);
            let sig = fit.uncertainties();
            let lines: Vec<([f64; 3], [f64; 3])> = (0..n_peaks)
                .map(|k| {
                    let p = &fit.params[3 * k..3 * k + 3];
                    let s = &sig[3 * k..3 * k + 3];
                    ([p[0], p[1].abs(), p[2]], [s[0], s[1], s[2]])
                })
                .collect();
            (fit, lines, None)
        }
        LineShape::Coherent => {
            let model = CoherentLines { n_peaks };
            let phases: &[f64] = if n_peaks == 2 {
                &[0.0, 0.5 * PI, PI, 1.5 * PI]
            } else {
                &[0.0]
            };
            let mut best: Option<LmFit> = None;
            for &psi in phases {
                let mut starts: Vec<f64> = lines0.iter().flat_map(|l| [l[0], l[1], l[2].sqrt()]).collect();
                if n_peaks == 2 {
                    starts.push(psi);
                }
                starts.push(baseline);
                let fit = levenberg_marquardt(&model, &freqs, &values, &starts, &cfg);
                if best.as_ref().is_none_or(|b| fit.rss < b.rss) {
                    best = Some(fit);
                }
            }
            let fit = best.expect("at least one start");
            let sig = fit.uncertainties();
            let lines: Vec<([f64; 3], [f64; 3])> = (0..n_peaks)
                .map(|k| {
                    let p = &fit.params[3 * k..3 * k + 3];
                    let s = &sig[3 * k..3 * k + 3];
                    ([p[0], p[1].abs(), p[2] * p[2]], [s[0], s[1], 2.0 * p[2].abs() * s[2]])
                })
                .collect();
            let phase = (n_peaks == 2).then(|| (fit.params[3 * n_peaks], sig[3 * n_peaks]));
            (fit, lines, phase)
        }
    };
    let sig = fit.uncertainties();
    let baseline_index = fit.params.len() - 1;

    let swapped = n_peaks == 2 && raw_lines[1].0[0] < raw_lines[0].0[0];
    let mut lines = raw_lines;
    lines.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));

    let mut names = Vec::new();
    let mut vals = Vec::new();
    let mut sigs = Vec::new();
    for (k, (p, s)) in lines.iter().enumerate() {
        for (j, label) in ["center", "fwhm", "amplitude"].iter().enumerate() {
            names.push(format!("{label}_{}", k + 1));
            vals.push(p[j]);
            sigs.push(s[j]);
        }
    }
    if let Some((psi, psi_sigma)) = phase {
        names.push("relative_phase_2".to_string());
        vals.push(wrap_phase(if swapped { -psi } else { psi }));
        sigs.push(psi_sigma);
    }
    names.push("baseline".to_string());
    vals.push(fit.params[baseline_index]);
    sigs.push(sig[baseline_index]);
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut result = FitResult::new(&name_refs, &vals, &sigs, fit.rss, fit.converged);

    // Exponentially distributed noise bins: mean = median / ln 2. A line must
    // rise above the largest value such noise plausibly reaches.
    let noise_mean = (baseline / std::f64::consts::LN_2).max(0.0);
    let threshold = ((values.len() as f64).ln() + 6.0) * noise_mean;
    for (p, _) in &lines {
        let h = 0.5 * p[1];
        let nearest = freqs.iter().map(|f| (f - p[0]).abs()).fold(f64::INFINITY, f64::min);
        let sampled_height = p[2] * h * h / (nearest * nearest + h * h);
        let inside = p[0] >= freqs[0] - df && p[0] <= freqs[freqs.len() - 1] + df;
        if !(sampled_height > threshold) || !inside || p[2] <= 0.0 {
            result.flags.insert(FitFlag::PeakNotFound);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::lm::numeric_gradient;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sinusoid_trace(f: f64, tau: f64, n: usize, dt: f64) -> TimeTrace {
        let p = [0.4, f, 0.3, 1.0 / tau, 1.0];
        let v = (0..n).map(|i| DecayingSinusoid.value(i as f64 * dt, &p)).collect();
        TimeTrace::uniform(0.0, dt, v).unwrap()
    }

    #[test]
    fn recovers_noiseless_sinusoid() {
        let tr = sinusoid_trace(40e6, 1e-6, 400, 1e-9);
        let fit = fit_decaying_sinusoid(&tr).unwrap();
        assert!(fit.converged);
        assert!((fit.param("frequency") / 40e6 - 1.0).abs() < 5e-4);
        assert!((fit.param("decay_time") / 1e-6 - 1.0).abs() < 1e-2);
        assert!(!fit.has(FitFlag::FrequencyUnconstrained));
    }

    #[test]
    fn zero_amplitude_sets_flag() {
        let tr = TimeTrace::uniform(0.0, 1e-9, vec![0.7; 64]).unwrap();
        let fit = fit_decaying_sinusoid(&tr).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.param("amplitude"), 0.0);
        assert!(fit.has(FitFlag::FrequencyUnconstrained));
        assert!((fit.param("offset") - 0.7).abs() < 1e-12);
    }

    #[test]
    fn noisy_sinusoid_frequency_within_half_percent() {
        // 100 noise realisations, 5% Gaussian noise relative to the amplitude.
        let noise = Normal::new(0.0, 0.05).unwrap();
        for rep in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
            let dt = 1e-9;
            let v: Vec<f64> = (0..200)
                .map(|i| {
                    let t = i as f64 * dt;
                    (2.0 * PI * 40e6 * t).cos() * (-t / 2e-6).exp() + noise.sample(&mut rng)
                })
                .collect();
            let fit = fit_decaying_sinusoid(&TimeTrace::uniform(0.0, dt, v).unwrap()).unwrap();
            let rel = (fit.param("frequency") / 40e6 - 1.0).abs();
            assert!(rel < 5e-3, "rep {rep}: {rel}");
        }
    }

    #[test]
    fn too_short_trace_rejected() {
        let tr = TimeTrace::uniform(0.0, 1.0, vec![0.0; 7]).unwrap();
        assert!(matches!(fit_decaying_sinusoid(&tr), Err(Error::TooFewSamples { .. })));
    }

    fn log_grid() -> Vec<f64> {
        (0..51)
            .map(|i| (200e-9f64.ln() + (5.5e-3f64.ln() - 200e-9f64.ln()) * i as f64 / 50.0).exp())
            .collect()
    }

    #[test]
    fn biexponential_recovers_rates() {
        let t = log_grid();
        let p = [0.5, 5000.0, 0.5, 200.0, 0.0];
        let v = t.iter().map(|&x| Biexponential.value(x, &p)).collect();
        let fit = fit_biexponential(&TimeTrace::from_samples(t, v).unwrap()).unwrap();
        assert!(!fit.has(FitFlag::Degenerate));
        assert!((fit.param("rate_a") / 5000.0 - 1.0).abs() < 0.05);
        assert!((fit.param("rate_b") / 200.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn single_exponential_is_flagged_degenerate() {
        let t = log_grid();
        let v = t.iter().map(|&x| (-800.0 * x).exp()).collect();
        let fit = fit_biexponential(&TimeTrace::from_samples(t, v).unwrap()).unwrap();
        assert!(fit.has(FitFlag::Degenerate));
        assert!((fit.param("combined_rate") / 800.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn flat_biexponential_trace() {
        let t = log_grid();
        let fit = fit_biexponential(&TimeTrace::from_samples(t, vec![0.25; 51]).unwrap()).unwrap();
        assert_eq!(fit.param("a1"), 0.0);
        assert_eq!(fit.param("a2"), 0.0);
        assert_eq!(fit.param("offset"), 0.25);
    }

    fn lorentz_spectrum(lines: &[(f64, f64, f64)], baseline: f64, n: usize, df: f64) -> PowerSpectrum {
        let mut p = Vec::new();
        for (c, w, a) in lines {
            p.extend_from_slice(&[*c, *w, *a]);
        }
        p.push(baseline);
        let model = LorentzianLines { n_peaks: lines.len() };
        PowerSpectrum {
            f0: 0.0,
            df,
            values: (0..n).map(|k| model.value(k as f64 * df, &p)).collect(),
        }
    }

    #[test]
    fn single_lorentzian_width() {
        let ps = lorentz_spectrum(&[(2670.3, 5.0, 10.0)], 0.01, 4000, 1.0);
        let fit = fit_lorentzian(&ps, 1).unwrap();
        assert!((fit.param("fwhm_1") / 5.0 - 1.0).abs() < 0.05);
        assert!(!fit.has(FitFlag::PeakNotFound));
    }

    #[test]
    fn doublet_splitting() {
        let ps = lorentz_spectrum(&[(2663.0, 5.0, 10.0), (2677.0, 5.0, 10.0)], 0.01, 4000, 1.0);
        let fit = fit_lorentzian(&ps, 2).unwrap();
        let split = fit.param("center_2") - fit.param("center_1");
        assert!((split - 14.0).abs() < 0.5, "{split}");
        assert!(fit.param("center_1") < fit.param("center_2"));
    }

    #[test]
    fn coherent_doublet_from_a_decaying_signal() {
        // Two lines sharing one decay: the cross term biases a plain Lorentzian sum.
        let n = 4000;
        let dt = 1.0 / 4000.0;
        let rate = PI * 5.0;
        let v = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                (-rate * t).exp() * ((2.0 * PI * 993.0 * t).cos() + (2.0 * PI * 1007.0 * t).cos())
            })
            .collect();
        let ps = crate::dsp::power_spectrum(&TimeTrace::uniform(0.0, dt, v).unwrap(), Window::None).unwrap();
        let fit = fit_lorentzian_with(&ps, 2, LineShape::Coherent).unwrap();
        let split = fit.param("center_2") - fit.param("center_1");
        assert!((split - 14.0).abs() < 0.05, "{split}");
        assert!((fit.param("fwhm_1") / 5.0 - 1.0).abs() < 0.02);
        let single = fit_lorentzian_with(
            &lorentz_spectrum(&[(40.0, 3.0, 2.0)], 0.01, 200, 1.0),
            1,
            LineShape::Coherent,
        )
        .unwrap();
        assert!((single.param("fwhm_1") - 3.0).abs() < 1e-6);
        assert!((single.param("amplitude_1") - 2.0).abs() < 1e-6);
    }

    #[test]
    fn white_noise_has_no_peak() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..512).map(|_| -rng.random::<f64>().ln()).collect();
        let ps = PowerSpectrum {
            f0: 0.0,
            df: 1.0,
            values,
        };
        let fit = fit_lorentzian(&ps, 1).unwrap();
        assert!(fit.has(FitFlag::PeakNotFound));
    }

    #[test]
    fn lorentzian_argument_checks() {
        let ps = lorentz_spectrum(&[(5.0, 1.0, 1.0)], 0.0, 10, 1.0);
        assert!(fit_lorentzian(&ps, 1).is_err());
        let ps = lorentz_spectrum(&[(50.0, 1.0, 1.0)], 0.0, 100, 1.0);
        assert!(fit_lorentzian(&ps, 3).is_err());
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = rng.random_range(0.0..2e-6);
            let p = [
                rng.random_range(0.1..1.0),
                rng.random_range(1e6..5e7),
                rng.random_range(-PI..PI),
                rng.random_range(1e5..1e7),
                rng.random_range(-1.0..1.0),
            ];
            assert_grad(&DecayingSinusoid, x, &p);

            let t = rng.random_range(0.0..5e-3);
            let q = [
                rng.random_range(0.1..1.0),
                rng.random_range(1e3..1e4),
                rng.random_range(0.1..1.0),
                rng.random_range(10.0..1e3),
                rng.random_range(-0.1..0.1),
            ];
            assert_grad(&Biexponential, t, &q);
            assert_grad(&SingleExponential, t, &[q[0], q[1], q[4]]);

            let f = rng.random_range(0.0..100.0);
            let l = [
                rng.random_range(20.0..80.0),
                rng.random_range(1.0..10.0),
                rng.random_range(0.5..2.0),
                rng.random_range(20.0..80.0),
                rng.random_range(1.0..10.0),
                rng.random_range(0.5..2.0),
                rng.random_range(0.0..0.1),
            ];
            assert_grad(&LorentzianLines { n_peaks: 2 }, f, &l);
            let c = [l[0], l[1], l[2], l[3], l[4], l[5], rng.random_range(-PI..PI), l[6]];
            assert_grad(&CoherentLines { n_peaks: 2 }, f, &c);
        }
    }

    fn assert_grad<M: Model>(model: &M, x: f64, p: &[f64]) {
        let mut g = vec![0.0; p.len()];
        model.gradient(x, p, &mut g);
        let num = numeric_gradient(model, x, p);
        let scale = g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        for (a, b) in g.iter().zip(&num) {
            assert!((a - b).abs() <= 1e-6 * scale.max(a.abs()), "{a} vs {b}");
        }
    }
}
