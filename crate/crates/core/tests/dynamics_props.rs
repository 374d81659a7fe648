//! Property tests for kinematics, the trap field and the equations of motion.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use librotrap::constants::ELEMENTARY_CHARGE;
use librotrap::dynamics::{integrate, linearized_torque, torque_body};
use librotrap::kinematics::{hat, rotation_from_euler, t_matrix};
use librotrap::secular::{body_curvatures, micromotion_amplitude};
use librotrap::{BodyShape, DriveWaveform, EulerAngles, IntegratorConfig, Particle, RigidBodyState, TrapConfig};

const EQ: EulerAngles = EulerAngles::new(0.0, FRAC_PI_2, 0.0);

fn reference_trap() -> TrapConfig {
    TrapConfig { u_dc: 0.0, u_ac: 100.0, omega_ac: 2.0 * PI * 250e3, l0: 100e-6, kappa: [-0.95, -1.05, 2.0] }
}

#[test]
fn rotations_are_special_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let phi = EulerAngles::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
        );
        let r = rotation_from_euler(&phi).into_inner();
        assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn body_rate_matches_finite_difference_of_rotation(
        a0 in -PI..PI, b0 in 0.3..2.8f64, g0 in -PI..PI,
        ra in -3.0..3.0f64, rb in -3.0..3.0f64, rg in -3.0..3.0f64, t in 0.0..1.0f64,
    ) {
        // phi(t) = phi0 + rate * sin(t), smooth and away from gimbal lock
        let at = |s: f64| EulerAngles::new(a0 + ra * s.sin(), b0 + 0.2 * rb.signum() * s.sin(), g0 + rg * s.sin());
        let rate = Vector3::new(ra, 0.2 * rb.signum(), rg) * t.cos();
        let h = 1e-5;
        let dr = (rotation_from_euler(&at(t + h)).into_inner() - rotation_from_euler(&at(t - h)).into_inner()) / (2.0 * h);
        let phi = at(t);
        let omega = t_matrix(&phi) * rate;
        let expected = rotation_from_euler(&phi).into_inner() * hat(&omega);
        let scale = expected.abs().max().max(1e-3);
        prop_assert!((dr - expected).abs().max() <= 1e-5 * scale);
    }

    #[test]
    fn field_gradient_is_symmetric(
        a in -PI..PI, b in 0.0..PI, g in -PI..PI, eps in -0.5..0.5f64, u in -500.0..500.0f64, t in 0.0..1e-4f64,
    ) {
        let trap = TrapConfig { kappa: [-1.0 + eps, -1.0 - eps, 2.0], u_dc: u * 0.1, ..reference_trap() };
        let k = DriveWaveform::new(trap).gradient_tensor_body(&EulerAngles::new(a, b, g), t);
        let scale = k.abs().max().max(1.0);
        prop_assert!((k - k.transpose()).abs().max() <= 1e-14 * scale);
        prop_assert!(k.trace().abs() <= 1e-12 * scale);
    }
}

#[test]
fn weakest_confinement_is_along_x() {
    assert_eq!(reference_trap().weakest_axis(), 0);
}

#[test]
fn linearized_torque_error_is_higher_order() {
    let p = Particle::new(BodyShape::cylindroid(26e-9, 34e-9, 100e-9).with_charge(100.0 * ELEMENTARY_CHARGE)).unwrap();
    let trap = reference_trap();
    let w = DriveWaveform::new(trap);
    let kb = body_curvatures(&trap, &EQ);
    let td = t_matrix(&EQ).diagonal();
    for i in 0..3 {
        let err = |d: f64| {
            let mut dv = Vector3::zeros();
            dv[i] = d;
            let full =
                torque_body(&EulerAngles::from_vector(&(EQ.as_vector() + dv)), &p.moments, &w, 0.0, &Vector3::zeros());
            let lin = linearized_torque(&p.moments.diagonal(), &kb, &td, trap.u_ac, trap.l0, &dv);
            (full - lin).norm()
        };
        let e: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&d| err(d)).collect();
        // each decade in delta_phi cuts the residual by at least ~100; the
        // torque is odd in the tilt, so some axes drop by 1000
        for k in 0..2 {
            assert!(e[k] / e[k + 1] > 80.0, "axis {i}: residuals {e:?}");
        }
    }
}

#[test]
fn micromotion_amplitude_matches_integration() {
    let p = Particle::new(BodyShape::cylindroid(30e-9, 30e-9, 100e-9).with_charge(100.0 * ELEMENTARY_CHARGE)).unwrap();
    let trap = reference_trap();
    let w = DriveWaveform::new(trap);
    let steps = 100;
    for (i, d) in [(0usize, 0.05), (1, 0.02)] {
        let mut v = EQ.as_vector();
        v[i] += d;
        let predicted =
            micromotion_amplitude(&EulerAngles::from_vector(&v), &p.moments, &p.props, &trap).unwrap()[i] / d;
        let cfg = IntegratorConfig::per_rf_period(&w, steps, 40.0 * trap.rf_period());
        let traj =
            integrate(&RigidBodyState::at_rest(EulerAngles::from_vector(&v)), &p.props, &p.moments, &w, &cfg, &[])
                .unwrap();
        let y: Vec<f64> = traj.angle_series(i).iter().map(|x| x - EQ[i]).collect();
        let t = traj.times();
        // secular part: centred one-period boxcar; micromotion: regress the
        // remainder on s(t) cos(Omega t)
        let (mut num, mut den) = (0.0, 0.0);
        for k in steps / 2..y.len() - steps / 2 {
            let window = &y[k - steps / 2..k + steps / 2];
            let s = window.iter().sum::<f64>() / steps as f64;
            let basis = s * (trap.omega_ac * t[k]).cos();
            num += (y[k] - s) * basis;
            den += basis * basis;
        }
        let measured = num / den;
        assert!(
            (measured - predicted).abs() <= 0.1 * predicted.abs(),
            "mode {i}: measured {measured:.4}, predicted {predicted:.4}"
        );
    }
}
