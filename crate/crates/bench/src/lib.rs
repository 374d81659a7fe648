//! Shared fixtures for the criterion benchmarks.

use std::f64::consts::PI;

use librotrap::constants::ELEMENTARY_CHARGE;
use librotrap::{BodyShape, Geometry, Particle, TrapConfig};

/// 100 V at 250 kHz in a 100 um trap with a slightly split radial plane.
pub fn reference_trap() -> TrapConfig {
    TrapConfig { u_dc: 0.0, u_ac: 100.0, omega_ac: 2.0 * PI * 250e3, l0: 100e-6, kappa: [-0.95, -1.05, 2.0] }
}

/// Elliptic cylinder with mean semi-axis 30 nm, length 100 nm and 100 e.
pub fn reference_particle(ratio: f64) -> Particle {
    let g = Geometry::cylindroid_with_ratio(30e-9, ratio, 100e-9);
    Particle::new(BodyShape::new(g).with_charge(100.0 * ELEMENTARY_CHARGE)).expect("valid shape")
}
