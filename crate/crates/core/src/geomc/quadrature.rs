use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dipole::{kernel_to_tesla, projected_kernel};
use super::geometry::{ChannelGeometry, SensorCylinder};
use super::mc::{EnsembleOptions, Statistic};
use crate::error::{invalid, Result};

/// Midpoint-grid resolution for [`quadrature_signal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridResolution {
    /// Channel cells along length, width, height.
    pub spin: [usize; 3],
    /// Sensor cells along radius (equal area rings), angle, depth.
    pub nv: [usize; 3],
}

/// Deterministic double sum over a channel grid and an equal-volume sensor grid.
///
/// Evaluates the same statistic as the Monte Carlo estimators; useful as a
/// brute-force cross-check on small geometries.
pub fn quadrature_signal(
    channel: &ChannelGeometry,
    sensor: &SensorCylinder,
    resolution: &GridResolution,
    options: &EnsembleOptions,
) -> Result<f64> {
    channel.validate()?;
    sensor.validate()?;
    options.validate().or_else(|e| match options.statistic {
        Statistic::Rms => Ok(()),
        Statistic::Mean => Err(e),
    })?;
    if resolution.spin.iter().chain(&resolution.nv).any(|&n| n == 0) {
        return Err(invalid("resolution", "every axis needs at least one cell"));
    }
    let [nr, nt, nd] = resolution.nv;
    let mut nvs = Vec::with_capacity(nr * nt * nd);
    for i in 0..nr {
        for j in 0..nt {
            for k in 0..nd {
                nvs.push(sensor.point([
                    (i as f64 + 0.5) / nr as f64,
                    (j as f64 + 0.5) / nt as f64,
                    (k as f64 + 0.5) / nd as f64,
                ]));
            }
        }
    }
    let [sx, sy, sz] = resolution.spin;
    let axis = options.bias_axis;
    let per_spin: Vec<f64> = (0..sx)
        .into_par_iter()
        .flat_map_iter(|i| {
            let nvs = &nvs;
            (0..sy).flat_map(move |j| {
                (0..sz).map(move |k| {
                    let s = channel.point([
                        (i as f64 + 0.5) / sx as f64,
                        (j as f64 + 0.5) / sy as f64,
                        (k as f64 + 0.5) / sz as f64,
                    ]);
                    nvs.iter()
                        .map(|p| projected_kernel(&axis, [p[0] - s[0], p[1] - s[1], p[2] - s[2]]))
                        .sum::<f64>()
                        / nvs.len() as f64
                })
            })
        })
        .collect();
    let n = per_spin.len() as f64;
    let value = match options.statistic {
        Statistic::Mean => per_spin.iter().sum::<f64>() / n,
        Statistic::Rms => (per_spin.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
    };
    Ok(value * kernel_to_tesla(options.moment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomc::mc::{ensemble_signal, McParams};

    #[test]
    fn agrees_with_closed_form_channel_integral() {
        let channel = ChannelGeometry::new(10.0, 4.0, 4.0, 0.5).unwrap();
        let sensor = SensorCylinder::centred(2.0, 2.0).unwrap();
        let res = GridResolution {
            spin: [40, 16, 16],
            nv: [8, 16, 8],
        };
        let grid = quadrature_signal(&channel, &sensor, &res, &EnsembleOptions::default()).unwrap();
        let mc = McParams {
            n_nv_samples: 64,
            n_spin_samples: 1,
            n_averages: 400,
            seed: 4,
        };
        let closed = ensemble_signal(&channel, &sensor, &mc, &EnsembleOptions::default()).unwrap();
        assert!(
            (grid - closed.value).abs() < 3.0 * closed.stderr + 2e-3 * grid.abs(),
            "{grid} {closed:?}"
        );
    }
}
