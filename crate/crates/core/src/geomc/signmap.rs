use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dipole::{kernel_to_tesla, projected_kernel};
use super::geometry::{ChannelGeometry, SensorCylinder};
use super::mc::EnsembleOptions;
use crate::error::{invalid, Result};
use crate::rng::{domain, task_rng};
use rand::Rng;

/// Channel cross-section through the sensor axis, perpendicular to the channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignMap {
    /// Cell-centre lateral positions (um).
    pub ys: Vec<f64>,
    /// Cell-centre heights above the surface (um).
    pub zs: Vec<f64>,
    /// NV-averaged projected field (tesla), `values[iz][iy]`.
    pub values: Vec<Vec<f64>>,
}

impl SignMap {
    pub fn sign(&self, iz: usize, iy: usize) -> i8 {
        let v = self.values[iz][iy];
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    }

    pub fn signs(&self) -> Vec<Vec<i8>> {
        (0..self.zs.len())
            .map(|iz| (0..self.ys.len()).map(|iy| self.sign(iz, iy)).collect())
            .collect()
    }
}

/// Sign of the projected field contributed by spins across the channel section.
///
/// Every cell uses the same NV sample, mirrored about the sensor axis in y so
/// the map inherits the mirror symmetry of the geometry.
pub fn sign_map(
    channel: &ChannelGeometry,
    sensor: &SensorCylinder,
    ny: usize,
    nz: usize,
    n_nv_samples: usize,
    seed: u64,
    options: &EnsembleOptions,
) -> Result<SignMap> {
    channel.validate()?;
    sensor.validate()?;
    options.validate()?;
    if ny < 2 || nz < 2 {
        return Err(invalid(
            "resolution",
            format!("need at least 2 x 2 cells, got {ny} x {nz}"),
        ));
    }
    if n_nv_samples < 2 {
        return Err(invalid("n_nv_samples", "need at least 2"));
    }
    let mut rng = task_rng(seed, &[domain::SIGN_MAP]);
    let mut nvs = Vec::with_capacity(n_nv_samples + 1);
    for _ in 0..n_nv_samples.div_ceil(2) {
        let p = sensor.point([rng.random(), rng.random(), rng.random()]);
        nvs.push(p);
        nvs.push([p[0], 2.0 * sensor.center[1] - p[1], p[2]]);
    }
    let (lo, hi) = (channel.lower(), channel.upper());
    let ys: Vec<f64> = (0..ny)
        .map(|j| lo[1] + (j as f64 + 0.5) * (hi[1] - lo[1]) / ny as f64)
        .collect();
    let zs: Vec<f64> = (0..nz)
        .map(|k| lo[2] + (k as f64 + 0.5) * (hi[2] - lo[2]) / nz as f64)
        .collect();
    let x = sensor.center[0];
    let scale = kernel_to_tesla(options.moment);
    let axis = options.bias_axis;
    let values = zs
        .par_iter()
        .map(|&z| {
            ys.iter()
                .map(|&y| {
                    scale
                        * nvs
                            .iter()
                            .map(|p| projected_kernel(&axis, [p[0] - x, p[1] - y, p[2] - z]))
                            .sum::<f64>()
                        / nvs.len() as f64
                })
                .collect()
        })
        .collect();
    Ok(SignMap { ys, zs, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centre_positive_edges_negative_and_symmetric() {
        let channel = ChannelGeometry::chip();
        let sensor = SensorCylinder::centred(45.0, 5.0).unwrap();
        let map = sign_map(&channel, &sensor, 20, 16, 4000, 1, &EnsembleOptions::default()).unwrap();
        let signs = map.signs();
        // Cells just above the sensor centre.
        assert_eq!(signs[0][9], 1);
        assert_eq!(signs[0][10], 1);
        // Low cells beside the sensor edge (|y| ~ 30 um).
        assert_eq!(signs[0][3], -1);
        assert_eq!(signs[0][16], -1);
        for row in &signs {
            let mut mirrored = row.clone();
            mirrored.reverse();
            assert_eq!(row, &mirrored);
        }
    }

    #[test]
    fn resolution_checked() {
        let channel = ChannelGeometry::chip();
        let sensor = SensorCylinder::centred(45.0, 5.0).unwrap();
        assert!(sign_map(&channel, &sensor, 1, 4, 100, 1, &EnsembleOptions::default()).is_err());
    }
}
