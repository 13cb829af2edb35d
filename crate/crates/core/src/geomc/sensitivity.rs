use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{ChannelGeometry, SensorCylinder};
use super::mc::{per_average_signals, EnsembleOptions, Estimate, McParams};
use crate::error::{invalid, Error, Result};
use crate::rng::{domain, task_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// NV layer thickness (um).
    pub d_nv: f64,
    /// `signal * sqrt(d_nv)`, scaled so the largest point is 1.
    pub signal_norm: f64,
    /// Bootstrap standard error of `signal_norm`.
    pub stderr: f64,
    /// Unweighted ensemble signal per NV (tesla).
    pub signal: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub points: Vec<CurvePoint>,
    /// Argmax thickness of every bootstrap replicate.
    pub bootstrap_argmax: Vec<f64>,
}

impl SensitivityCurve {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if p.signal_norm > self.points[best].signal_norm {
                best = i;
            }
        }
        best
    }

    pub fn argmax_depth(&self) -> f64 {
        self.points[self.argmax()].d_nv
    }

    /// True when the two-sigma bar of point `i` stays below the two-sigma bar
    /// of the maximum, i.e. point `i` is ruled out as the optimum.
    pub fn excludes_as_maximum(&self, i: usize) -> bool {
        let top = &self.points[self.argmax()];
        let p = &self.points[i];
        i != self.argmax() && p.signal_norm + 2.0 * p.stderr < top.signal_norm - 2.0 * top.stderr
    }

    /// Fraction of bootstrap replicates whose maximum lies in `[lo, hi]`.
    pub fn argmax_fraction_in(&self, lo: f64, hi: f64) -> f64 {
        if self.bootstrap_argmax.is_empty() {
            return f64::NAN;
        }
        let inside = self.bootstrap_argmax.iter().filter(|d| (lo..=hi).contains(*d)).count();
        inside as f64 / self.bootstrap_argmax.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveOptions {
    pub ensemble: EnsembleOptions,
    pub bootstrap_resamples: usize,
    /// Sensor axis position in the surface plane (um).
    pub sensor_center: [f64; 2],
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            ensemble: EnsembleOptions::default(),
            bootstrap_resamples: 200,
            sensor_center: [0.0, 0.0],
        }
    }
}

fn weighted_normalized(means: &[f64], grid: &[f64]) -> Vec<f64> {
    let weighted: Vec<f64> = means.iter().zip(grid).map(|(m, d)| m * d.sqrt()).collect();
    let max = weighted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    weighted.iter().map(|w| w / max).collect()
}

fn argmax_of(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Layer-thickness sensitivity: ensemble signal times `sqrt(d_nv)` over `grid`.
///
/// Every average evaluates all thicknesses on the same unit draws. Standard
/// errors and the argmax distribution come from resampling whole averages.
pub fn sensitivity_curve(
    grid: &[f64],
    channel: &ChannelGeometry,
    sensor_diameter: f64,
    mc: &McParams,
    options: &CurveOptions,
) -> Result<SensitivityCurve> {
    if grid.is_empty() {
        return Err(Error::Empty("d_nv grid"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("d_nv grid", "must be strictly ascending"));
    }
    let sensor = SensorCylinder::new(sensor_diameter, grid[0], options.sensor_center)?;
    let rows = per_average_signals(channel, &sensor, grid, mc, &options.ensemble)?;
    let n_avg = rows.len();
    let columns: Vec<Vec<f64>> = (0..grid.len()).map(|i| rows.iter().map(|r| r[i]).collect()).collect();
    let estimates: Vec<Estimate> = columns.iter().map(|c| Estimate::from_samples(c)).collect();
    let means: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let norm = weighted_normalized(&means, grid);

    let mut rng = task_rng(mc.seed, &[domain::BOOTSTRAP]);
    let mut replicates = Vec::with_capacity(options.bootstrap_resamples);
    let mut bootstrap_argmax = Vec::with_capacity(options.bootstrap_resamples);
    for _ in 0..options.bootstrap_resamples {
        let mut sums = vec![0.0; grid.len()];
        for _ in 0..n_avg {
            let row = &rows[rng.random_range(0..n_avg)];
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        let means: Vec<f64> = sums.iter().map(|s| s / n_avg as f64).collect();
        let rep = weighted_normalized(&means, grid);
        bootstrap_argmax.push(grid[argmax_of(&rep)]);
        replicates.push(rep);
    }
    let stderr: Vec<f64> = (0..grid.len())
        .map(|i| {
            if replicates.len() < 2 {
                return f64::INFINITY;
            }
            let vals: Vec<f64> = replicates.iter().map(|r| r[i]).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
        })
        .collect();

    Ok(SensitivityCurve {
        points: grid
            .iter()
            .enumerate()
            .map(|(i, &d)| CurvePoint {
                d_nv: d,
                signal_norm: norm[i],
                stderr: stderr[i],
                signal: estimates[i],
            })
            .collect(),
        bootstrap_argmax,
    })
}

/// 5 um, then 10 um to 150 um in 10 um steps.
pub fn default_depth_grid() -> Vec<f64> {
    std::iter::once(5.0).chain((1..=15).map(|k| 10.0 * k as f64)).collect()
}
