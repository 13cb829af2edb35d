use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex;
use nvfluidics_core::constants::PhysicsConstants;
use nvfluidics_core::dsp::{
    fit_biexponential, fit_decaying_sinusoid, fit_lorentzian, power_spectrum, FitFlag, PowerSpectrum, TimeTrace, Window,
};
use nvfluidics_core::protocols::{PulseElement, PulseSequence};
use nvfluidics_core::spin::{
    apply_rotation, evolve_free, nv_transition_frequency, BlochState, MagneticBias, RelaxationParams,
};
use proptest::prelude::*;

type C = Complex<f64>;
type Mat2 = [[C; 2]; 2];

fn unit_axis() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0f64..1.0, 0.0f64..2.0 * PI).prop_map(|(cz, phi)| {
        let s = (1.0 - cz * cz).sqrt();
        Vector3::new(s * phi.cos(), s * phi.sin(), cz)
    })
}

fn ball_state() -> impl Strategy<Value = BlochState> {
    (unit_axis(), 0.0f64..=1.0).prop_map(|(v, r)| BlochState::from_vector(v * r))
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn dagger(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// exp(-i angle n.sigma / 2)
fn unitary(n: Vector3<f64>, angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    let i = C::new(0.0, 1.0);
    [
        [C::new(c, 0.0) - i * s * n.z, -i * s * C::new(n.x, -n.y)],
        [-i * s * C::new(n.x, n.y), C::new(c, 0.0) + i * s * n.z],
    ]
}

fn density(state: BlochState) -> Mat2 {
    [
        [C::new((1.0 + state.z) / 2.0, 0.0), C::new(state.x, -state.y) / 2.0],
        [C::new(state.x, state.y) / 2.0, C::new((1.0 - state.z) / 2.0, 0.0)],
    ]
}

fn bloch(rho: &Mat2) -> BlochState {
    BlochState::new(2.0 * rho[0][1].re, -2.0 * rho[0][1].im, (rho[0][0] - rho[1][1]).re)
}

#[derive(Debug, Clone)]
enum Step {
    Pulse {
        rabi: f64,
        phase: f64,
        detuning: f64,
        duration: f64,
    },
    Wait {
        detuning: f64,
        duration: f64,
    },
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        (1e6f64..2e7, 0.0f64..2.0 * PI, -5e6f64..5e6, 0.0f64..2e-7).prop_map(|(rabi, phase, detuning, duration)| {
            Step::Pulse {
                rabi,
                phase,
                detuning,
                duration,
            }
        }),
        (-5e6f64..5e6, 0.0f64..1e-6).prop_map(|(detuning, duration)| Step::Wait { detuning, duration }),
    ]
}

fn apply_to_density(rho: Mat2, step: &Step) -> Mat2 {
    let u = match *step {
        Step::Pulse {
            rabi,
            phase,
            detuning,
            duration,
        } => {
            let field = Vector3::new(rabi * phase.cos(), rabi * phase.sin(), detuning);
            unitary(field.normalize(), 2.0 * PI * field.norm() * duration)
        }
        Step::Wait { detuning, duration } => unitary(Vector3::z(), 2.0 * PI * detuning * duration),
    };
    mul(&mul(&u, &rho), &dagger(&u))
}

proptest! {
    #[test]
    fn rotations_preserve_norm(state in ball_state(), axis in unit_axis(), angle in -20.0f64..20.0) {
        let out = apply_rotation(state, axis, angle).unwrap();
        prop_assert!((out.norm() - state.norm()).abs() < 1e-12);
    }

    #[test]
    fn rotations_about_one_axis_compose(
        state in ball_state(), axis in unit_axis(), a in -10.0f64..10.0, b in -10.0f64..10.0,
    ) {
        let twice = apply_rotation(apply_rotation(state, axis, a).unwrap(), axis, b).unwrap();
        let once = apply_rotation(state, axis, a + b).unwrap();
        prop_assert!((twice.as_vector() - once.as_vector()).norm() < 1e-12);
    }

    #[test]
    fn rotation_then_inverse_is_identity(state in ball_state(), axis in unit_axis(), angle in -10.0f64..10.0) {
        let back = apply_rotation(apply_rotation(state, axis, angle).unwrap(), axis, -angle).unwrap();
        prop_assert!((back.as_vector() - state.as_vector()).norm() < 1e-12);
    }

    #[test]
    fn free_evolution_stays_physical(
        state in ball_state(), detuning in -1e7f64..1e7, tau in 0.0f64..1e-3,
        g1 in 0.0f64..1e4, extra in 0.0f64..1e5, eq in -1.0f64..=1.0,
    ) {
        let relax = RelaxationParams::new(g1, g1 / 2.0 + extra, eq).unwrap();
        let out = evolve_free(state, detuning, tau, &relax).unwrap();
        prop_assert!(out.is_physical());
        prop_assert!(out.x.hypot(out.y) <= state.x.hypot(state.y) + 1e-12);
    }

    #[test]
    fn free_evolution_without_relaxation_preserves_norm(
        state in ball_state(), detuning in -1e7f64..1e7, tau in 0.0f64..1e-3,
    ) {
        let out = evolve_free(state, detuning, tau, &RelaxationParams::none()).unwrap();
        prop_assert!((out.norm() - state.norm()).abs() < 1e-12);
    }

    #[test]
    fn transition_frequency_falls_with_field(a in 0.0f64..0.1, b in 0.0f64..0.1) {
        let constants = PhysicsConstants::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        let f_lo = nv_transition_frequency(&constants, &MagneticBias::along_z(lo).unwrap()).unwrap();
        let f_hi = nv_transition_frequency(&constants, &MagneticBias::along_z(hi).unwrap()).unwrap();
        prop_assert!(f_hi < f_lo);
    }

    #[test]
    fn sequences_match_density_matrix_evolution(steps in prop::collection::vec(step(), 1..12)) {
        let mut elements = vec![PulseElement::LaserInit { duration: 1e-6 }];
        let mut rho = density(BlochState::polarized());
        for s in &steps {
            elements.push(match *s {
                Step::Pulse { rabi, phase, detuning, duration } => PulseElement::MicrowavePulse {
                    rabi_frequency: rabi, phase, detuning, duration,
                },
                Step::Wait { detuning, duration } => PulseElement::Wait { duration, detuning },
            });
            rho = apply_to_density(rho, s);
        }
        elements.push(PulseElement::Readout { duration: 1e-6 });
        let state = PulseSequence::new(elements, 1).unwrap().execute(&RelaxationParams::none())[0];
        let expected = bloch(&rho);
        prop_assert!((state.as_vector() - expected.as_vector()).norm() < 1e-9, "{state:?} vs {expected:?}");
    }

    #[test]
    fn spectrum_conserves_energy(values in prop::collection::vec(-10.0f64..10.0, 2..300)) {
        let energy: f64 = values.iter().map(|v| v * v).sum();
        let trace = TimeTrace::uniform(0.0, 1e-3, values).unwrap();
        let ps = power_spectrum(&trace, Window::None).unwrap();
        prop_assert!((ps.total_power() - energy).abs() <= 1e-9 * energy.max(1.0));
    }

    #[test]
    fn sinusoid_fit_round_trip(
        amplitude in 0.2f64..2.0, cycles in 3.0f64..40.0, phase in -3.0f64..3.0,
        decay in 0.3f64..3.0, offset in -1.0f64..1.0,
    ) {
        let n = 256;
        let dt = 1e-8;
        let span = n as f64 * dt;
        let f = cycles / span;
        let tau = decay * span;
        let values = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                amplitude * (2.0 * PI * f * t + phase).cos() * (-t / tau).exp() + offset
            })
            .collect();
        let fit = fit_decaying_sinusoid(&TimeTrace::uniform(0.0, dt, values).unwrap()).unwrap();
        prop_assert!((fit.param("frequency") / f - 1.0).abs() < 1e-6, "{fit:?}");
        prop_assert!((fit.param("decay_time") / tau - 1.0).abs() < 1e-5, "{fit:?}");
        prop_assert!((fit.param("amplitude") / amplitude - 1.0).abs() < 1e-5, "{fit:?}");
        prop_assert!((fit.param("offset") - offset).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn biexponential_fit_round_trip(
        fraction in 0.3f64..0.7, slow_rate in 1e3f64..1e4, ratio in 4.0f64..20.0, offset in -0.2f64..0.2,
    ) {
        let fast_rate = slow_rate * ratio;
        let times: Vec<f64> = (0..80).map(|i| 2e-6 * (1e4f64).powf(i as f64 / 79.0)).collect();
        let values = times
            .iter()
            .map(|&t| fraction * (-fast_rate * t).exp() + (1.0 - fraction) * (-slow_rate * t).exp() + offset)
            .collect();
        let fit = fit_biexponential(&TimeTrace::from_samples(times, values).unwrap()).unwrap();
        prop_assert!(!fit.has(FitFlag::Degenerate), "{fit:?}");
        let (ra, rb) = (fit.param("rate_a"), fit.param("rate_b"));
        let (fast, slow) = if ra > rb { (ra, rb) } else { (rb, ra) };
        prop_assert!((fast / fast_rate - 1.0).abs() < 1e-4, "{fit:?}");
        prop_assert!((slow / slow_rate - 1.0).abs() < 1e-4, "{fit:?}");
    }

    #[test]
    fn lorentzian_fit_round_trip(
        center in 50.0f64..150.0, fwhm in 1.0f64..8.0, height in 5.0f64..100.0, baseline in 0.1f64..1.0,
    ) {
        let df = 0.25;
        let values = (0..800)
            .map(|k| {
                let d = k as f64 * df - center;
                let h = fwhm / 2.0;
                height * h * h / (d * d + h * h) + baseline
            })
            .collect();
        let ps = PowerSpectrum { f0: 0.0, df, values };
        let fit = fit_lorentzian(&ps, 1).unwrap();
        prop_assert!((fit.param("center_1") - center).abs() < 1e-6, "{fit:?}");
        prop_assert!((fit.param("fwhm_1") / fwhm - 1.0).abs() < 1e-6, "{fit:?}");
        prop_assert!((fit.param("amplitude_1") / height - 1.0).abs() < 1e-6, "{fit:?}");
    }
}

#[test]
fn million_rotations_keep_the_norm() {
    let axis = Vector3::new(1.0, 2.0, -0.5).normalize();
    let mut state = BlochState::new(0.3, -0.4, 0.5);
    let start = state.norm();
    for i in 0..1_000_000 {
        state = apply_rotation(state, axis, 0.1 + 1e-6 * i as f64).unwrap();
    }
    assert!((state.norm() - start).abs() < 1e-9);
}
