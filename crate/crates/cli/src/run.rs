//! Experiment dispatch and run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nvfluidics_core::constants::Nucleus;
use nvfluidics_core::dsp::{
    fit_biexponential, fit_decaying_sinusoid, fit_lorentzian_with, power_spectrum, FitFlag, FitResult, LineShape,
    PowerSpectrum, TimeTrace, Window,
};
use nvfluidics_core::geomc::{sensitivity_curve, sign_map, CurveOptions, SensorCylinder};
use nvfluidics_core::protocols::{
    alias_frequency, linear_grid, log_spaced, run_casr, run_correlation, run_rabi, run_t1, CasrSettings,
    CorrelationOptions, DecouplingBlock, FidModel, GdSample, RabiOptions,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentKind, ScenarioConfig};
use crate::error::ScenarioError;
use crate::output::{csv_table, write_atomic, Artifact};
use crate::plot::{heatmap, LinePlot, Series};

pub const TOOL: &str = "nvfluidics";

/// Record of one run; enough to repeat it and check every output byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub notes: Vec<String>,
    /// File name to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub summary: BTreeMap<String, f64>,
    pub config: ScenarioConfig,
}

impl RunManifest {
    pub fn file_name(config: &ScenarioConfig) -> String {
        format!("{}.manifest.toml", config.stem())
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(self).map_err(|e| ScenarioError::Serialize(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ScenarioError::Syntax(e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            ScenarioError::Invalid(vec![crate::error::Issue {
                path: e.path().to_string(),
                message: e.into_inner().message().to_string(),
            }])
        })
    }
}

/// Everything a run produces, before it touches the file system.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl RunOutput {
    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }

    fn add(&mut self, name: String, bytes: Vec<u8>) {
        self.artifacts.push(Artifact::new(name, bytes));
    }

    fn plot(&mut self, config: &ScenarioConfig, name: String, svg: impl FnOnce() -> String) {
        if config.output.plots {
            self.add(name, svg().into_bytes());
        }
    }

    fn note_flags(&mut self, what: &str, fit: &FitResult) {
        for flag in &fit.flags {
            self.notes.push(format!("{what}: {flag:?}"));
        }
    }
}

/// Validates and evaluates a scenario in memory.
pub fn execute(config: &ScenarioConfig) -> Result<RunOutput, ScenarioError> {
    config.validate()?;
    let kind = config.experiment;
    let result = match kind {
        ExperimentKind::Rabi => rabi(config),
        ExperimentKind::T1 => t1(config),
        ExperimentKind::Correlation => correlation(config),
        ExperimentKind::Casr => casr(config),
        ExperimentKind::Sensitivity => sensitivity(config),
        ExperimentKind::Signmap => signmap(config),
    };
    result.map_err(|e| match e {
        ScenarioError::Core(source) => ScenarioError::Run {
            experiment: kind.name(),
            source,
        },
        other => other,
    })
}

/// Runs a scenario and writes its artifacts, then the manifest, into the output directory.
pub fn run(config: &ScenarioConfig) -> Result<(RunManifest, PathBuf), ScenarioError> {
    let start = Instant::now();
    let output = execute(config)?;
    let dir = config.output_dir();
    let mut outputs = BTreeMap::new();
    for artifact in &output.artifacts {
        write_atomic(&dir, &artifact.name, &artifact.bytes)?;
        outputs.insert(artifact.name.clone(), artifact.digest());
    }
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        duration_s: start.elapsed().as_secs_f64(),
        notes: output.notes,
        outputs,
        summary: output.summary,
        config: config.clone(),
    };
    write_atomic(&dir, &RunManifest::file_name(config), manifest.to_toml()?.as_bytes())?;
    Ok((manifest, dir))
}

/// Digests in `reference` that the new run did not reproduce.
pub fn digest_mismatches(reference: &RunManifest, rerun: &RunManifest) -> Vec<String> {
    let mut out = Vec::new();
    for (name, digest) in &reference.outputs {
        match rerun.outputs.get(name) {
            Some(d) if d == digest => {}
            Some(d) => out.push(format!("  {name}: expected {digest}, got {d}")),
            None => out.push(format!("  {name}: not produced")),
        }
    }
    for name in rerun.outputs.keys() {
        if !reference.outputs.contains_key(name) {
            out.push(format!("  {name}: not in the manifest"));
        }
    }
    out
}

type Outcome<T> = Result<T, ScenarioError>;

fn trace_csv(trace: &TimeTrace) -> Outcome<Vec<u8>> {
    csv_table(
        &["time_s", "value"],
        trace.times().into_iter().zip(trace.values()).map(|(t, v)| [t, *v]),
    )
}

fn spectrum_csv(ps: &PowerSpectrum) -> Outcome<Vec<u8>> {
    csv_table(
        &["freq_hz", "power"],
        ps.frequencies().into_iter().zip(&ps.values).map(|(f, p)| [f, *p]),
    )
}

fn nucleus(name: &str) -> Nucleus {
    name.parse().expect("validated nucleus")
}

fn concentration_label(micromolar: f64) -> String {
    format!("{micromolar}uM")
}

fn rabi(config: &ScenarioConfig) -> Outcome<RunOutput> {
    let c = config.rabi.as_ref().expect("filled rabi table");
    let readout = config.readout.clone().unwrap_or_default().params(config.seed);
    let durations = nvfluidics_core::protocols::rabi::linear_durations(c.step, c.points);
    let trace = run_rabi(
        c.rabi_frequency,
        &durations,
        &readout,
        &RabiOptions {
            drive_decay_time: c.drive_decay_time,
        },
    )?;
    let fit = fit_decaying_sinusoid(&trace)?;
    let stem = config.stem();
    let mut out = RunOutput::default();
    let f = fit.param("frequency");
    out.summary.insert("fitted_frequency_hz".into(), f);
    out.summary.insert("pi_pulse_s".into(), 0.5 / f);
    out.note_flags("rabi fit", &fit);
    out.add(format!("{stem}.csv"), trace_csv(&trace)?);
    out.plot(config, format!("{stem}.svg"), || {
        let ns: Vec<f64> = trace.times().iter().map(|t| t * 1e9).collect();
        LinePlot::new("Rabi oscillation", "pulse duration (ns)", "fluorescence (a.u.)")
            .series(Series::line("fluorescence", &ns, trace.values()))
            .render()
    });
    Ok(out)
}

fn t1(config: &ScenarioConfig) -> Outcome<RunOutput> {
    let c = config.t1.as_ref().expect("filled t1 table");
    let readout = config.readout.clone().unwrap_or_default().params(config.seed);
    let taus = log_spaced(c.tau_start, c.tau_stop, c.points);
    let stem = config.stem();
    let mut out = RunOutput::default();
    let mut plot = LinePlot::new("T1 relaxometry", "dark time (s)", "normalized population").log_x();
    let mut tables = Vec::new();
    for &micromolar in &c.concentrations {
        let sample = GdSample::new(micromolar * 1e-6, c.rate_constant, c.intrinsic_gamma1)?;
        let trace = run_t1(&taus, &sample, &c.decay.into(), &readout)?;
        let label = concentration_label(micromolar);
        let fit = fit_biexponential(&trace)?;
        for key in ["rate_a", "rate_b", "combined_rate"] {
            out.summary.insert(format!("{key}_{label}"), fit.param(key));
        }
        out.note_flags(&format!("t1 fit {label}"), &fit);
        plot = plot.series(Series::line(
            format!("{micromolar} uM Gd"),
            &trace.times(),
            trace.values(),
        ));
        tables.push((label, trace));
    }
    for (label, trace) in &tables {
        out.add(format!("{stem}_{label}.csv"), trace_csv(trace)?);
    }
    out.plot(config, format!("{stem}.svg"), || plot.render());
    Ok(out)
}

fn correlation(config: &ScenarioConfig) -> Outcome<RunOutput> {
    let c = config.correlation.as_ref().expect("filled correlation table");
    let constants = config.constants();
    let larmor = constants.gamma_of(nucleus(&c.nucleus)) * c.b0;
    let fid = FidModel::singlet(larmor, c.decay_time, c.amplitude)?;
    let block = DecouplingBlock::resonant(larmor, c.n_pulses, constants.gamma_electron)?;
    let grid = linear_grid(c.t_start, c.t_stop, c.points);
    let options = CorrelationOptions {
        phase_samples: c.phase_samples,
        readout: config.readout.clone().unwrap_or_default().params(config.seed),
    };
    let trace = run_correlation(&grid, &fid, &block, &options)?;
    let ps = power_spectrum(&trace.centred(), Window::None)?;
    let dt = trace.dt().expect("uniform grid");
    let mut out = RunOutput::default();
    out.summary.insert("larmor_hz".into(), larmor);
    out.summary
        .insert("alias_frequency_hz".into(), alias_frequency(larmor, 1.0 / dt));
    out.summary.insert("peak_frequency_hz".into(), ps.peak_frequency());
    out.summary.insert("bin_width_hz".into(), ps.df);
    out.summary.insert("block_duration_s".into(), block.duration());
    let stem = config.stem();
    out.add(format!("{stem}.csv"), trace_csv(&trace)?);
    out.add(format!("{stem}_spectrum.csv"), spectrum_csv(&ps)?);
    out.plot(config, format!("{stem}.svg"), || {
        let us: Vec<f64> = trace.times().iter().map(|t| t * 1e6).collect();
        LinePlot::new("Correlation signal", "correlation time (us)", "population")
            .series(Series::line("signal", &us, trace.values()))
            .render()
    });
    out.plot(config, format!("{stem}_spectrum.svg"), || {
        let khz: Vec<f64> = ps.frequencies().iter().map(|f| f * 1e-3).collect();
        LinePlot::new("Correlation spectrum", "frequency (kHz)", "power")
            .series(Series::line("power", &khz, &ps.values))
            .render()
    });
    Ok(out)
}

fn casr(config: &ScenarioConfig) -> Outcome<RunOutput> {
    let c = config.casr.as_ref().expect("filled casr table");
    let constants = config.constants();
    let larmor = constants.gamma_of(nucleus(&c.nucleus)) * c.b0;
    let fid = if c.splitting > 0.0 {
        FidModel::doublet(larmor, c.splitting, c.decay_time, c.amplitude)?
    } else {
        FidModel::singlet(larmor, c.decay_time, c.amplitude)?
    };
    let settings = CasrSettings {
        subsequence_duration: 1.0 / c.sample_rate,
        n_repetitions: c.n_repetitions,
        acquisition_time: c.acquisition_time,
        gamma_nv: constants.gamma_electron,
        dnp_gain: c.dnp_gain,
        filter_gain: c.filter_gain,
        readout: config.readout.clone().unwrap_or_default().params(config.seed),
    };
    let trace = run_casr(&fid, &settings)?;
    let ps = power_spectrum(&trace.centred(), Window::None)?;
    let alias = alias_frequency(larmor, c.sample_rate);
    let mut out = RunOutput::default();
    out.summary.insert("larmor_hz".into(), larmor);
    out.summary.insert("alias_frequency_hz".into(), alias);
    out.summary.insert("bin_width_hz".into(), ps.df);
    let n = c.n_lines();
    match fit_lorentzian_with(&ps, n, LineShape::Coherent) {
        Ok(fit) => {
            for k in 1..=n {
                out.summary
                    .insert(format!("center_{k}_hz"), fit.param(&format!("center_{k}")));
                out.summary
                    .insert(format!("fwhm_{k}_hz"), fit.param(&format!("fwhm_{k}")));
                out.summary
                    .insert(format!("amplitude_{k}"), fit.param(&format!("amplitude_{k}")));
            }
            if n == 2 {
                out.summary
                    .insert("splitting_hz".into(), fit.param("center_2") - fit.param("center_1"));
            }
            if fit.has(FitFlag::PeakNotFound) {
                out.notes.push("casr fit: no line stands out of the noise".into());
            }
            out.note_flags("casr fit", &fit);
        }
        Err(e) => out.notes.push(format!("casr fit failed: {e}")),
    }
    let stem = config.stem();
    out.add(format!("{stem}.csv"), trace_csv(&trace)?);
    out.add(format!("{stem}_spectrum.csv"), spectrum_csv(&ps)?);
    out.plot(config, format!("{stem}_spectrum.svg"), || {
        let window = 8.0 * (c.splitting + 1.0 / (std::f64::consts::PI * c.decay_time));
        let (fs, ps): (Vec<f64>, Vec<f64>) = ps
            .frequencies()
            .into_iter()
            .zip(ps.values.iter().copied())
            .filter(|(f, _)| (f - alias).abs() <= window)
            .unzip();
        LinePlot::new("CASR spectrum", "aliased frequency (Hz)", "power")
            .series(Series::line("power", &fs, &ps))
            .render()
    });
    Ok(out)
}

fn sensitivity(config: &ScenarioConfig) -> Outcome<RunOutput> {
    let (g, s, m) = geomc_tables(config);
    let c = config.sensitivity.as_ref().expect("filled sensitivity table");
    let options = CurveOptions {
        ensemble: m.ensemble(&config.constants()),
        bootstrap_resamples: m.bootstrap_resamples,
        sensor_center: s.center,
    };
    let curve = sensitivity_curve(&c.d_nv, &g.channel(), s.diameter, &m.params(config.seed), &options)?;
    let best = curve.argmax_depth();
    let mut out = RunOutput::default();
    out.summary.insert("argmax_d_nv_um".into(), best);
    out.summary
        .insert("bootstrap_argmax_share".into(), curve.argmax_fraction_in(best, best));
    let stem = config.stem();
    out.add(
        format!("{stem}.csv"),
        csv_table(
            &["d_nv_um", "signal_norm", "stderr"],
            curve.points.iter().map(|p| [p.d_nv, p.signal_norm, p.stderr]),
        )?,
    );
    out.add(
        format!("{stem}_signal.csv"),
        csv_table(
            &["d_nv_um", "signal_t", "stderr_t"],
            curve.points.iter().map(|p| [p.d_nv, p.signal.value, p.signal.stderr]),
        )?,
    );
    out.plot(config, format!("{stem}.svg"), || {
        let d: Vec<f64> = curve.points.iter().map(|p| p.d_nv).collect();
        let v: Vec<f64> = curve.points.iter().map(|p| p.signal_norm).collect();
        let e: Vec<f64> = curve.points.iter().map(|p| 2.0 * p.stderr).collect();
        LinePlot::new(
            "NV layer sensitivity",
            "NV layer thickness (um)",
            "normalized signal (bars: 2 SE)",
        )
        .series(Series::line("signal x sqrt(d)", &d, &v).with_errors(e))
        .render()
    });
    Ok(out)
}

fn signmap(config: &ScenarioConfig) -> Outcome<RunOutput> {
    let (g, s, m) = geomc_tables(config);
    let c = config.signmap.as_ref().expect("filled signmap table");
    let sensor = SensorCylinder::new(s.diameter, c.d_nv, s.center)?;
    let map = sign_map(
        &g.channel(),
        &sensor,
        c.ny,
        c.nz,
        c.n_nv_samples,
        config.seed,
        &m.ensemble(&config.constants()),
    )?;
    let cells = (map.ys.len() * map.zs.len()) as f64;
    let positive = map.values.iter().flatten().filter(|v| **v > 0.0).count() as f64;
    let mut out = RunOutput::default();
    out.summary.insert("positive_fraction".into(), positive / cells);
    let stem = config.stem();
    let rows = map.zs.iter().enumerate().flat_map(|(iz, z)| {
        let map = &map;
        map.ys.iter().enumerate().map(move |(iy, y)| {
            [
                y.to_string(),
                z.to_string(),
                map.values[iz][iy].to_string(),
                map.sign(iz, iy).to_string(),
            ]
        })
    });
    out.add(
        format!("{stem}.csv"),
        csv_table(&["y_um", "z_um", "signal", "sign"], rows)?,
    );
    out.plot(config, format!("{stem}.svg"), || {
        heatmap(
            "Projected field sign",
            "y (um)",
            "z (um)",
            &map.ys,
            &map.zs,
            &map.values,
        )
    });
    Ok(out)
}

fn geomc_tables(
    config: &ScenarioConfig,
) -> (
    &crate::config::GeometryConfig,
    &crate::config::SensorConfig,
    &crate::config::McConfig,
) {
    (
        config.geometry.as_ref().expect("filled geometry table"),
        config.sensor.as_ref().expect("filled sensor table"),
        config.mc.as_ref().expect("filled mc table"),
    )
}

/// Loads either a manifest or a scenario from disk.
pub fn load(path: &Path) -> Result<Loaded, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ScenarioError::Syntax(e.to_string()))?;
    if table.contains_key("outputs") && table.contains_key("config") {
        let manifest = RunManifest::from_toml(&text)?;
        manifest.config.validate()?;
        Ok(Loaded::Manifest(Box::new(manifest)))
    } else {
        Ok(Loaded::Scenario(Box::new(crate::config::parse_scenario_str(&text)?)))
    }
}

#[derive(Debug)]
pub enum Loaded {
    Scenario(Box<ScenarioConfig>),
    Manifest(Box<RunManifest>),
}
