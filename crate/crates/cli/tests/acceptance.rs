//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use nvfluidics_cli::sensing_volume;
use nvfluidics_core::constants::{Nucleus, PhysicsConstants};
use nvfluidics_core::dsp::{
    fit_biexponential, fit_decaying_sinusoid, fit_lorentzian, fit_lorentzian_with, power_spectrum, FitFlag, LineShape,
    PowerSpectrum, TimeTrace, Window,
};
use nvfluidics_core::geomc::{
    default_depth_grid, dipolar_field, ensemble_signal, quadrature_signal, sensitivity_curve, ChannelGeometry,
    CurveOptions, EnsembleOptions, GridResolution, McParams, SensorCylinder, SpinIntegration,
};
use nvfluidics_core::protocols::rabi::linear_durations;
use nvfluidics_core::protocols::{
    alias_frequency, default_correlation_grid, default_t1_grid, run_casr, run_correlation, run_rabi, run_t1,
    CasrSettings, CorrelationOptions, DecouplingBlock, FidModel, GdSample, RabiOptions, ReadoutParams, T1Decay,
};
use nvfluidics_core::spin::{apply_rotation, larmor_frequency, nv_transition_frequency, BlochState, MagneticBias};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    check: fn() -> Check,
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn nv_transition() -> Check {
    let bias = MagneticBias::along_z(0.033).map_err(fail)?;
    let f = nv_transition_frequency(&PhysicsConstants::default(), &bias).map_err(fail)?;
    ensure(
        (1.94e9..=1.95e9).contains(&f),
        format!("f(33 mT) = {:.4} GHz", f * 1e-9),
    )
}

fn rabi() -> Check {
    let durations = linear_durations(0.5e-9, 400);
    let trace = run_rabi(40e6, &durations, &ReadoutParams::noiseless(), &RabiOptions::default()).map_err(fail)?;
    let fit = fit_decaying_sinusoid(&trace).map_err(fail)?;
    let f = fit.param("frequency");
    let t_pi = 0.5 / f;
    let ok = (f / 40e6 - 1.0).abs() < 1e-3 && (t_pi / 12.5e-9 - 1.0).abs() < 1e-3;
    ensure(ok, format!("f = {:.6} MHz, t_pi = {:.5} ns", f * 1e-6, t_pi * 1e9))
}

fn larmor() -> Check {
    let c = PhysicsConstants::default();
    let f19 = larmor_frequency(c.gamma_of(Nucleus::F19), 0.031);
    let h1 = larmor_frequency(c.gamma_of(Nucleus::H1), 0.180);
    let ok = (f19 - 1.242e6).abs() <= 1e3 && (h1 - 7.664e6).abs() <= 1e3;
    ensure(ok, format!("19F = {:.4} MHz, 1H = {:.4} MHz", f19 * 1e-6, h1 * 1e-6))
}

fn t1_ordering() -> Check {
    let grid = default_t1_grid();
    let decay = T1Decay::TwoComponent {
        fast_fraction: 0.5,
        fast_factor: 10.0,
    };
    let mut curves = Vec::new();
    let mut worst: f64 = 0.0;
    for micromolar in [0.0, 1.0, 10.0] {
        let sample = GdSample::new(micromolar * 1e-6, 1e8, 500.0).map_err(fail)?;
        let trace = run_t1(&grid, &sample, &decay, &ReadoutParams::noiseless()).map_err(fail)?;
        let fit = fit_biexponential(&trace).map_err(fail)?;
        let slow = 500.0 + 1e8 * micromolar * 1e-6;
        let (ra, rb) = (fit.param("rate_a"), fit.param("rate_b"));
        let (fast_fit, slow_fit) = if ra > rb { (ra, rb) } else { (rb, ra) };
        worst = worst
            .max((fast_fit / (10.0 * slow) - 1.0).abs())
            .max((slow_fit / slow - 1.0).abs());
        curves.push(trace.values().to_vec());
    }
    let ordered = (1..grid.len()).all(|i| curves[0][i] > curves[1][i] && curves[1][i] > curves[2][i]);
    ensure(
        ordered && worst < 0.05 && grid.len() == 51,
        format!("strictly ordered: {ordered}, worst rate error {:.2e}", worst),
    )
}

fn correlation() -> Check {
    let f = 1.242e6;
    let fid = FidModel::singlet(f, 300e-6, 2e-8).map_err(fail)?;
    let block = DecouplingBlock::resonant(f, 32, PhysicsConstants::default().gamma_electron).map_err(fail)?;
    let grid = default_correlation_grid();
    let trace = run_correlation(&grid, &fid, &block, &CorrelationOptions::default()).map_err(fail)?;
    let ps = power_spectrum(&trace.centred(), Window::None).map_err(fail)?;
    let expected = alias_frequency(f, 1.0 / trace.dt().ok_or("non-uniform grid")?);
    let peak = ps.peak_frequency();
    ensure(
        grid.len() == 2501 && (peak - expected).abs() <= ps.df,
        format!("peak {peak:.1} Hz, expected {expected:.1} Hz, bin {:.1} Hz", ps.df),
    )
}

fn casr() -> Check {
    let larmor = larmor_frequency(Nucleus::H1.default_gamma(), 0.180);
    let fid = FidModel::doublet(larmor, 14.0, 1.0 / (PI * 5.0), 1e-9).map_err(fail)?;
    let settings = CasrSettings::default();
    let trace = run_casr(&fid, &settings).map_err(fail)?;
    let ps = power_spectrum(&trace.centred(), Window::None).map_err(fail)?;
    let fit = fit_lorentzian_with(&ps, 2, LineShape::Coherent).map_err(fail)?;
    let split = fit.param("center_2") - fit.param("center_1");
    let (w1, w2) = (fit.param("fwhm_1"), fit.param("fwhm_2"));
    let ok = (settings.sample_rate() - 9470.0).abs() < 1e-9
        && settings.acquisition_time == 1.0
        && (split - 14.0).abs() <= 0.5
        && [w1, w2].iter().all(|w| (w / 5.0 - 1.0).abs() <= 0.1)
        && !fit.has(FitFlag::PeakNotFound);
    ensure(ok, format!("splitting {split:.3} Hz, FWHM {w1:.3} / {w2:.3} Hz"))
}

fn sensitivity() -> Check {
    let curve = sensitivity_curve(
        &default_depth_grid(),
        &ChannelGeometry::chip(),
        45.0,
        &McParams::desk(1),
        &CurveOptions::default(),
    )
    .map_err(fail)?;
    let best = curve.argmax_depth();
    let excluded = curve
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.d_nv <= 20.0 || p.d_nv >= 120.0)
        .all(|(i, _)| curve.excludes_as_maximum(i));
    ensure(
        (50.0..=70.0).contains(&best) && excluded,
        format!(
            "argmax {best} um, bootstrap share in [50, 70] = {:.3}, edges excluded: {excluded}",
            curve.argmax_fraction_in(50.0, 70.0)
        ),
    )
}

fn oracle_equivalence() -> Check {
    let channel = ChannelGeometry::new(10.0, 4.0, 4.0, 0.5).map_err(fail)?;
    let sensor = SensorCylinder::centred(2.0, 2.0).map_err(fail)?;
    let grid = GridResolution {
        spin: [40, 16, 16],
        nv: [8, 24, 8],
    };
    let exact = quadrature_signal(&channel, &sensor, &grid, &EnsembleOptions::default()).map_err(fail)?;
    let options = EnsembleOptions {
        integration: SpinIntegration::MonteCarlo,
        ..EnsembleOptions::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mc = McParams {
            n_nv_samples: 40,
            n_spin_samples: 2000,
            n_averages: 200,
            seed,
        };
        let est = ensemble_signal(&channel, &sensor, &mc, &options).map_err(fail)?;
        worst = worst.max((est.value - exact).abs() / est.stderr);
    }
    ensure(
        worst < 3.0,
        format!("grid {exact:.5e} T, worst MC deviation {worst:.2} SE over 10 seeds"),
    )
}

fn volume() -> Check {
    let v = sensing_volume(45.0, 80.0);
    ensure((v - 127.2).abs() <= 0.1, format!("{v:.3} pL"))
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    Vector3::new(s * phi.cos(), s * phi.sin(), z)
}

fn property_suites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut report = Vec::new();

    let mut norm_err: f64 = 0.0;
    for _ in 0..1_000_000 {
        let v = unit_vector(&mut rng) * rng.random_range(0.0..1.0);
        let state = BlochState::from_vector(v);
        let out = apply_rotation(state, unit_vector(&mut rng), rng.random_range(-10.0..10.0)).map_err(fail)?;
        norm_err = norm_err.max((out.norm() - state.norm()).abs());
    }
    report.push(format!("rotation norm {norm_err:.1e}"));

    let mut parseval: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..2000);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let energy: f64 = values.iter().map(|v| v * v).sum();
        let ps = power_spectrum(&TimeTrace::uniform(0.0, 1e-6, values).map_err(fail)?, Window::None).map_err(fail)?;
        parseval = parseval.max((ps.total_power() - energy).abs() / energy);
    }
    report.push(format!("Parseval {parseval:.1e}"));

    let fits = fit_round_trips(&mut rng)?;
    report.push(fits.0);

    let mut divergence: f64 = 0.0;
    for _ in 0..1000 {
        let m = unit_vector(&mut rng) * 1e-26;
        let r = unit_vector(&mut rng) * rng.random_range(1e-7..1e-4);
        let h = 1e-4 * r.norm();
        let mut div = 0.0;
        for axis in 0..3 {
            let mut e = Vector3::zeros();
            e[axis] = h;
            let plus = dipolar_field(m, r + e).map_err(fail)?;
            let minus = dipolar_field(m, r - e).map_err(fail)?;
            div += (plus[axis] - minus[axis]) / (2.0 * h);
        }
        let scale = dipolar_field(m, r).map_err(fail)?.norm() / r.norm();
        divergence = divergence.max(div.abs() / scale);
    }
    report.push(format!("relative divergence {divergence:.1e}"));

    let deterministic = [1usize, 2, 4]
        .iter()
        .map(|&threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(fail)?
                .install(|| {
                    let mc = McParams {
                        n_averages: 200,
                        ..McParams::desk(77)
                    };
                    sensitivity_curve(
                        &[10.0, 60.0, 110.0],
                        &ChannelGeometry::chip(),
                        45.0,
                        &mc,
                        &CurveOptions::default(),
                    )
                    .map_err(fail)
                })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let bitwise = deterministic.windows(2).all(|w| {
        w[0].points.iter().zip(&w[1].points).all(|(a, b)| {
            a.signal_norm.to_bits() == b.signal_norm.to_bits() && a.stderr.to_bits() == b.stderr.to_bits()
        })
    });
    report.push(format!("bitwise across 1/2/4 workers: {bitwise}"));

    let ok = norm_err < 1e-12 && parseval < 1e-9 && fits.1 && divergence < 1e-6 && bitwise;
    ensure(ok, report.join(", "))
}

/// 100 noiseless draws per model; returns a summary and whether all recovered their parameters.
fn fit_round_trips(rng: &mut ChaCha8Rng) -> Result<(String, bool), String> {
    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        let n = 256;
        let dt = 1e-8;
        let f = rng.random_range(3.0..40.0) / (n as f64 * dt);
        let tau = rng.random_range(0.3..3.0) * n as f64 * dt;
        let (a, phase, offset) = (
            rng.random_range(0.2..2.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-1.0..1.0),
        );
        let values = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                a * (2.0 * PI * f * t + phase).cos() * (-t / tau).exp() + offset
            })
            .collect();
        let fit = fit_decaying_sinusoid(&TimeTrace::uniform(0.0, dt, values).map_err(fail)?).map_err(fail)?;
        let err = (fit.param("frequency") / f - 1.0)
            .abs()
            .max((fit.param("decay_time") / tau - 1.0).abs());
        worst[0] = worst[0].max(err);

        let slow = rng.random_range(1e3..1e4);
        let fast = slow * rng.random_range(4.0..20.0);
        let frac = rng.random_range(0.3..0.7);
        let times: Vec<f64> = (0..80).map(|i| 2e-6 * 1e4f64.powf(i as f64 / 79.0)).collect();
        let values = times
            .iter()
            .map(|&t| frac * (-fast * t).exp() + (1.0 - frac) * (-slow * t).exp())
            .collect();
        let fit = fit_biexponential(&TimeTrace::from_samples(times, values).map_err(fail)?).map_err(fail)?;
        let (ra, rb) = (fit.param("rate_a"), fit.param("rate_b"));
        let (hi, lo) = if ra > rb { (ra, rb) } else { (rb, ra) };
        worst[1] = worst[1].max((hi / fast - 1.0).abs()).max((lo / slow - 1.0).abs());

        let center = rng.random_range(50.0..150.0);
        let fwhm = rng.random_range(1.0..8.0);
        let height = rng.random_range(5.0..100.0);
        let values = (0..800)
            .map(|k| {
                let d = k as f64 * 0.25 - center;
                let h = fwhm / 2.0;
                height * h * h / (d * d + h * h) + 0.5
            })
            .collect();
        let fit = fit_lorentzian(
            &PowerSpectrum {
                f0: 0.0,
                df: 0.25,
                values,
            },
            1,
        )
        .map_err(fail)?;
        let err = ((fit.param("center_1") - center) / fwhm)
            .abs()
            .max((fit.param("fwhm_1") / fwhm - 1.0).abs());
        worst[2] = worst[2].max(err);
    }
    Ok((
        format!(
            "fit round-trips x100 (sinusoid {:.1e}, biexponential {:.1e}, Lorentzian {:.1e})",
            worst[0], worst[1], worst[2]
        ),
        worst.iter().all(|w| *w < 1e-4),
    ))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "NV transition at 33 mT",
            budget: Duration::from_millis(1),
            check: nv_transition,
        },
        Criterion {
            id: 2,
            name: "Rabi frequency and pi pulse",
            budget: Duration::from_secs(1),
            check: rabi,
        },
        Criterion {
            id: 3,
            name: "Larmor frequencies",
            budget: Duration::from_millis(1),
            check: larmor,
        },
        Criterion {
            id: 4,
            name: "T1 ordering and rate recovery",
            budget: Duration::from_secs(5),
            check: t1_ordering,
        },
        Criterion {
            id: 5,
            name: "Correlation spectroscopy alias peak",
            budget: Duration::from_secs(10),
            check: correlation,
        },
        Criterion {
            id: 6,
            name: "CASR doublet splitting and width",
            budget: Duration::from_secs(30),
            check: casr,
        },
        Criterion {
            id: 7,
            name: "Sensitivity optimum",
            budget: Duration::from_secs(120),
            check: sensitivity,
        },
        Criterion {
            id: 8,
            name: "Grid summation vs Monte Carlo",
            budget: Duration::from_secs(60),
            check: oracle_equivalence,
        },
        Criterion {
            id: 9,
            name: "Sensing volume",
            budget: Duration::from_millis(1),
            check: volume,
        },
        Criterion {
            id: 10,
            name: "Property suites",
            budget: Duration::from_secs(300),
            check: property_suites,
        },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.check)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let (status, detail) = match (&result, in_time) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over the {:?} budget", c.budget)),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!(
            "{status} [{:>2}] {:<38} {:>10.3} ms  {detail}",
            c.id,
            c.name,
            elapsed.as_secs_f64() * 1e3
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
