//! Closed-loop feedback invariants, gas damping structure and contrast
//! monotonicity.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use proptest::prelude::*;

use librotrap::constants::ELEMENTARY_CHARGE;
use librotrap::cooling::{excited_state, run_cooling, CoolingOptions, CoolingRun, FeedbackConfig};
use librotrap::interferometry::contrast_reduced;
use librotrap::secular::analyze;
use librotrap::thermo::surface_damping_integral;
use librotrap::{BodyShape, GasModel, Geometry, Mode, Particle, TrapConfig};

fn cooling_trap() -> TrapConfig {
    TrapConfig { u_dc: 0.0, u_ac: 100.0, omega_ac: 2.0 * PI * 250e3, l0: 100e-6, kappa: [-0.95, -1.05, 2.0] }
}

fn cool(mode: Mode, fb: FeedbackConfig, t_end: f64) -> CoolingRun {
    let p = Particle::new(BodyShape::cylindroid(30e-9, 30e-9, 100e-9).with_charge(100.0 * ELEMENTARY_CHARGE)).unwrap();
    let trap = cooling_trap();
    let eq = analyze(&p.moments, &p.props, &trap).unwrap().equilibrium;
    run_cooling(&excited_state(&eq, mode, 0.1), &p.props, &p.moments, &trap, &fb, t_end, &CoolingOptions::default())
        .unwrap()
}

/// Mean energy over consecutive blocks of `width` seconds.
fn block_means(run: &CoolingRun, mode: Mode, width: f64) -> Vec<(f64, f64)> {
    let (t, e) = (&run.trace.times, run.trace.energy(mode));
    let mut out = Vec::new();
    let mut k = 0;
    while k < t.len() {
        let end = t[k] + width;
        let j = t.partition_point(|&s| s < end);
        if j == t.len() && t[t.len() - 1] - t[k] < 0.99 * width {
            break;
        }
        out.push((t[k], e[k..j].iter().sum::<f64>() / (j - k) as f64));
        k = j;
    }
    out
}

#[test]
fn decay_rate_is_linear_in_depth() {
    let mut per_delta = Vec::new();
    for delta in [0.01, 0.02, 0.05] {
        let fb = FeedbackConfig { delta, ..FeedbackConfig::for_modes(&[Mode::Beta]) };
        let omega = cool(Mode::Beta, fb.clone(), 1e-4).trace.omegas[1];
        // about five e-folds past the onset
        let run = cool(Mode::Beta, fb, 0.4e-3 + 5.0 / (omega * delta));
        let rate = run.trace.fitted_rates[1].expect("fit");
        per_delta.push(rate / delta);
    }
    let reference = per_delta[2];
    for r in &per_delta {
        assert!((r - reference).abs() <= 0.15 * reference, "{per_delta:?}");
    }
}

#[test]
fn no_actuation_before_min_cycles() {
    // three alpha periods need about 3.3 ms of history
    let run = cool(Mode::Alpha, FeedbackConfig::for_modes(&[Mode::Alpha]), 3e-3);
    assert!(run.waveform.channel_for(Mode::Alpha).is_none());
    assert!(run.trace.cooling_start[0].is_none());

    let fb = FeedbackConfig::for_modes(&[Mode::Beta]);
    let run = cool(Mode::Beta, fb.clone(), 0.5e-3);
    let f = run.trace.omegas[1] / (2.0 * PI);
    let start = run.trace.cooling_start[1].expect("beta cooling starts");
    assert!(start >= fb.min_cycles / f);
    let ch = run.waveform.channel_for(Mode::Beta).unwrap();
    assert!(ch.t_start >= fb.min_cycles / f);
}

#[test]
fn zero_depth_keeps_energy_flat() {
    for mode in [Mode::Alpha, Mode::Beta] {
        let fb = FeedbackConfig { delta: 0.0, ..FeedbackConfig::for_modes(&[mode]) };
        let run = cool(mode, fb, 5e-3);
        assert!(run.waveform.channels.is_empty());
        // windows long enough to span a whole alpha period
        let m = block_means(&run, mode, 0.5e-3);
        let e0 = m[0].1;
        for (t, e) in &m {
            assert!((e - e0).abs() <= 0.01 * e0, "{} mode at {t:.2e}: {e:e} vs {e0:e}", mode.name());
        }
    }
}

#[test]
fn closed_loop_energy_is_non_increasing() {
    let run = cool(Mode::Beta, FeedbackConfig::for_modes(&[Mode::Beta]), 1.5e-3);
    let start = run.trace.cooling_start[1].unwrap();
    let means: Vec<f64> =
        block_means(&run, Mode::Beta, 1e-4).into_iter().filter(|(t, _)| *t >= start).map(|(_, e)| e).collect();
    assert!(means.len() > 5);
    for w in means.windows(2) {
        assert!(w[1] <= w[0] * 1.001, "{means:?}");
    }
}

#[test]
fn contrast_is_monotone_in_temperature() {
    for theta in [0.0375, 0.3, 1.0] {
        let c: Vec<f64> =
            (0..20).map(|k| contrast_reduced(theta, 10f64.powf(-1.0 + 0.25 * k as f64), None).unwrap()).collect();
        for w in c.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "theta {theta}: {c:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn surface_damping_tensor_is_symmetric_psd(
        a in 5e-9..80e-9f64, b in 5e-9..80e-9f64, l in 10e-9..300e-9f64, ac in 0.0..1.0f64, boxed in any::<bool>(),
    ) {
        let g = if boxed { Geometry::Box { a, b, c: l } } else { Geometry::Cylindroid { a, b, length: l } };
        let m = surface_damping_integral(&g, &GasModel::from_torr(1e-9, 300.0).with_accommodation(ac));
        let scale = m.abs().max();
        prop_assert!((m - m.transpose()).abs().max() <= 1e-12 * scale);
        let eig = SymmetricEigen::new(m).eigenvalues;
        prop_assert!(eig.min() >= -1e-10 * scale);
    }
}
