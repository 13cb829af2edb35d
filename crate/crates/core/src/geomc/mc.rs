use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dipole::{box_projected, kernel_to_tesla, projected_kernel};
use super::geometry::{ChannelGeometry, SensorCylinder};
use crate::constants::Nucleus;
use crate::error::{invalid, Error, Result};
use crate::rng::{domain, task_rng};

/// Monte Carlo sample counts and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McParams {
    pub n_nv_samples: usize,
    pub n_spin_samples: usize,
    pub n_averages: usize,
    pub seed: u64,
}

impl McParams {
    /// 40 NVs, 32000 spins, 10000 averages.
    pub fn full(seed: u64) -> Self {
        Self {
            n_nv_samples: 40,
            n_spin_samples: 32_000,
            n_averages: 10_000,
            seed,
        }
    }

    /// Paper sample sizes with 1000 averages.
    pub fn desk(seed: u64) -> Self {
        Self {
            n_averages: 1000,
            ..Self::full(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_nv_samples", self.n_nv_samples),
            ("n_spin_samples", self.n_spin_samples),
            ("n_averages", self.n_averages),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Value with its one-sigma standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let stderr = if samples.len() > 1 {
            let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            f64::INFINITY
        };
        Self { value: mean, stderr }
    }
}

/// How the per-spin signals are summarised over the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Coherent sum: mean over spins of the NV-averaged projected field.
    #[default]
    Mean,
    /// Root mean square over spins of the NV-averaged projected field.
    Rms,
}

/// How the channel integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinIntegration {
    /// Exact box integral per NV sample; supports only [`Statistic::Mean`].
    #[default]
    ClosedForm,
    /// Random spin positions, `n_spin_samples` per average.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub statistic: Statistic,
    pub integration: SpinIntegration,
    /// Bias field direction; sample moments and the NV axis point along it.
    pub bias_axis: Vector3<f64>,
    /// Moment per sample spin (J/T).
    pub moment: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            statistic: Statistic::Mean,
            integration: SpinIntegration::ClosedForm,
            bias_axis: Vector3::z(),
            moment: Nucleus::H1.default_moment(),
        }
    }
}

impl EnsembleOptions {
    pub fn validate(&self) -> Result<()> {
        let n = self.bias_axis.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::NonUnitAxis(n));
        }
        if !(self.moment > 0.0 && self.moment.is_finite()) {
            return Err(invalid("moment", "must be positive"));
        }
        if self.statistic == Statistic::Rms && self.integration == SpinIntegration::ClosedForm {
            return Err(invalid("statistic", "rms needs monte_carlo spin integration"));
        }
        Ok(())
    }
}

fn unit3(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random(), rng.random(), rng.random()]
}

/// Unit-cube draws for one average, reused for every sensor depth.
struct AverageDraws {
    nv: Vec<[f64; 3]>,
    spins: Vec<[f64; 3]>,
}

impl AverageDraws {
    fn new(mc: &McParams, average: usize, with_spins: bool) -> Self {
        let mut rng = task_rng(mc.seed, &[domain::NV_SAMPLES, average as u64]);
        let nv = (0..mc.n_nv_samples).map(|_| unit3(&mut rng)).collect();
        let spins = if with_spins {
            let mut rng = task_rng(mc.seed, &[domain::SPIN_SAMPLES, average as u64]);
            (0..mc.n_spin_samples).map(|_| unit3(&mut rng)).collect()
        } else {
            Vec::new()
        };
        Self { nv, spins }
    }

    /// Statistic for one average in um^-3 (kernel units).
    fn evaluate(&self, channel: &ChannelGeometry, sensor: &SensorCylinder, options: &EnsembleOptions) -> f64 {
        let axis = &options.bias_axis;
        let nvs: Vec<[f64; 3]> = self.nv.iter().map(|u| sensor.point(*u)).collect();
        match options.integration {
            SpinIntegration::ClosedForm => {
                let (lo, hi) = (channel.lower(), channel.upper());
                nvs.iter().map(|p| box_projected(lo, hi, *p, axis)).sum::<f64>() / (nvs.len() as f64 * channel.volume())
            }
            SpinIntegration::MonteCarlo => {
                let per_spin = self.spins.iter().map(|u| {
                    let s = channel.point(*u);
                    nvs.iter()
                        .map(|p| projected_kernel(axis, [p[0] - s[0], p[1] - s[1], p[2] - s[2]]))
                        .sum::<f64>()
                        / nvs.len() as f64
                });
                let n = self.spins.len() as f64;
                match options.statistic {
                    Statistic::Mean => per_spin.sum::<f64>() / n,
                    Statistic::Rms => (per_spin.map(|v| v * v).sum::<f64>() / n).sqrt(),
                }
            }
        }
    }
}

/// Per-average statistic (tesla) for every sensor depth in `depths`.
///
/// Row `a` holds average `a`. All depths share the same unit draws, so
/// differences along a row carry much less noise than the rows themselves.
pub fn per_average_signals(
    channel: &ChannelGeometry,
    sensor: &SensorCylinder,
    depths: &[f64],
    mc: &McParams,
    options: &EnsembleOptions,
) -> Result<Vec<Vec<f64>>> {
    channel.validate()?;
    sensor.validate()?;
    mc.validate()?;
    options.validate()?;
    for &d in depths {
        crate::error::require_positive("depth", d)?;
    }
    let scale = kernel_to_tesla(options.moment);
    let with_spins = options.integration == SpinIntegration::MonteCarlo;
    Ok((0..mc.n_averages)
        .into_par_iter()
        .map(|a| {
            let draws = AverageDraws::new(mc, a, with_spins);
            depths
                .iter()
                .map(|&d| scale * draws.evaluate(channel, &sensor.with_depth(d), options))
                .collect()
        })
        .collect())
}

/// Ensemble signal of the channel as seen by the NV cylinder (tesla).
///
/// For [`Statistic::Rms`] this is the root mean square over sample-spin
/// positions of the NV-averaged projected field.
pub fn ensemble_signal(
    channel: &ChannelGeometry,
    sensor: &SensorCylinder,
    mc: &McParams,
    options: &EnsembleOptions,
) -> Result<Estimate> {
    let rows = per_average_signals(channel, sensor, &[sensor.depth], mc, options)?;
    let values: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    Ok(Estimate::from_samples(&values))
}

/// RMS over spin positions of the NV-averaged projected field, by double Monte Carlo.
pub fn rms_ensemble_signal(
    channel: &ChannelGeometry,
    sensor: &SensorCylinder,
    mc: &McParams,
    bias_axis: Vector3<f64>,
    moment: f64,
) -> Result<Estimate> {
    let options = EnsembleOptions {
        statistic: Statistic::Rms,
        integration: SpinIntegration::MonteCarlo,
        bias_axis,
        moment,
    };
    ensemble_signal(channel, sensor, mc, &options)
}

/// Field along `bias_axis` from one sample spin, averaged over `n_nv_samples`
/// uniform NV positions in the sensor (tesla).
pub fn projected_mean_field(
    spin: [f64; 3],
    sensor: &SensorCylinder,
    bias_axis: Vector3<f64>,
    moment: f64,
    n_nv_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Estimate> {
    sensor.validate()?;
    let n = bias_axis.norm();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitAxis(n));
    }
    if !(spin[2] > 0.0) || sensor.contains(spin) {
        return Err(Error::SpinOutsideSample(spin[0], spin[1], spin[2]));
    }
    if n_nv_samples < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: n_nv_samples,
        });
    }
    let scale = kernel_to_tesla(moment);
    let values: Vec<f64> = (0..n_nv_samples)
        .map(|_| {
            let p = sensor.point(unit3(rng));
            scale * projected_kernel(&bias_axis, [p[0] - spin[0], p[1] - spin[1], p[2] - spin[2]])
        })
        .collect();
    Ok(Estimate::from_samples(&values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_mc(seed: u64) -> McParams {
        McParams {
            n_nv_samples: 40,
            n_spin_samples: 200,
            n_averages: 64,
            seed,
        }
    }

    #[test]
    fn rms_requires_spin_sampling() {
        let opts = EnsembleOptions {
            statistic: Statistic::Rms,
            ..EnsembleOptions::default()
        };
        assert!(opts.validate().is_err());
    }

    #[test]
    fn closed_form_and_spin_sampling_agree() {
        let channel = ChannelGeometry::new(60.0, 30.0, 20.0, 5.0).unwrap();
        let sensor = SensorCylinder::centred(20.0, 10.0).unwrap();
        let mc = small_mc(3);
        let exact = ensemble_signal(&channel, &sensor, &mc, &EnsembleOptions::default()).unwrap();
        let sampled = ensemble_signal(
            &channel,
            &sensor,
            &mc,
            &EnsembleOptions {
                integration: SpinIntegration::MonteCarlo,
                ..EnsembleOptions::default()
            },
        )
        .unwrap();
        let se = exact.stderr.hypot(sampled.stderr);
        assert!((exact.value - sampled.value).abs() < 3.0 * se, "{exact:?} {sampled:?}");
    }

    #[test]
    fn projected_field_sign_and_errors() {
        let sensor = SensorCylinder::centred(45.0, 5.0).unwrap();
        let mut rng = task_rng(1, &[0]);
        let above = projected_mean_field([0.0, 0.0, 5.0], &sensor, Vector3::z(), 1e-26, 2000, &mut rng).unwrap();
        assert!(above.value > 0.0);
        let side = projected_mean_field([0.0, 45.0, 5.0], &sensor, Vector3::z(), 1e-26, 2000, &mut rng).unwrap();
        assert!(side.value < 0.0);
        assert!(matches!(
            projected_mean_field([0.0, 0.0, -1.0], &sensor, Vector3::z(), 1e-26, 100, &mut rng),
            Err(Error::SpinOutsideSample(..))
        ));
    }
}
