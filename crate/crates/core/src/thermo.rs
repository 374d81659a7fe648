//! Rotational damping by residual-gas collisions, the resulting heating
//! rates, and steady-state libration temperatures under feedback.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::{AIR_MOLECULE_MASS, BOLTZMANN, TORR};
use crate::error::{Error, Result};
use crate::kinematics::EulerAngles;
use crate::quadrature::GaussLegendre;
use crate::secular::mode_axes;
use crate::shapes::{shape_integral, BodyShape, Geometry, MassProperties, ShapeIntegral};

const AZIMUTH_NODES: usize = 48;
const LINE_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasModel {
    /// Pressure (Pa).
    pub pressure: f64,
    /// Gas temperature (K).
    pub temperature: f64,
    /// Molecule mass (kg).
    pub molecule_mass: f64,
    /// Accommodation coefficient: 1 fully diffuse, 0 fully specular.
    pub accommodation: f64,
    /// Particle surface temperature (K).
    pub surface_temperature: f64,
}

impl GasModel {
    pub fn new(pressure: f64, temperature: f64) -> Self {
        Self {
            pressure,
            temperature,
            molecule_mass: AIR_MOLECULE_MASS,
            accommodation: 1.0,
            surface_temperature: temperature,
        }
    }

    pub fn from_torr(torr: f64, temperature: f64) -> Self {
        Self::new(torr * TORR, temperature)
    }

    pub fn with_accommodation(mut self, alpha_c: f64) -> Self {
        self.accommodation = alpha_c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pressure >= 0.0 && self.pressure.is_finite()) {
            return Err(Error::InvalidParameter(format!("pressure must be >= 0, got {}", self.pressure)));
        }
        if !(self.temperature > 0.0 && self.surface_temperature > 0.0) {
            return Err(Error::InvalidParameter("temperatures must be positive".into()));
        }
        if !(self.molecule_mass > 0.0) {
            return Err(Error::InvalidParameter("molecule mass must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.accommodation) {
            return Err(Error::InvalidParameter(format!(
                "accommodation coefficient must lie in [0, 1], got {}",
                self.accommodation
            )));
        }
        Ok(())
    }

    pub fn number_density(&self) -> f64 {
        self.pressure / (BOLTZMANN * self.temperature)
    }

    /// `sqrt(m_g k_B T / 2 pi)`.
    pub fn momentum_scale(&self) -> f64 {
        (self.molecule_mass * BOLTZMANN * self.temperature / (2.0 * PI)).sqrt()
    }

    pub fn gamma_s(&self) -> f64 {
        (self.surface_temperature / self.temperature).sqrt()
    }

    /// Weight of the `(r x n)(r x n)` term in the surface integrand.
    pub fn specular_weight(&self) -> f64 {
        4.0 - 3.0 * self.accommodation + 0.5 * PI * self.accommodation * self.gamma_s()
    }

    /// `eta = (pi/2) (4 - 3 alpha_c + (pi/2) alpha_c gamma_s)`.
    pub fn eta(&self) -> f64 {
        0.5 * PI * self.specular_weight()
    }
}

/// Rotational damping rates about the body axes (1/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingRates {
    pub gamma: Vector3<f64>,
}

impl DampingRates {
    /// Rates seen by the Euler-angle modes at the alignment `eq`.
    pub fn per_mode(&self, eq: &EulerAngles) -> Vector3<f64> {
        let axes = mode_axes(eq);
        Vector3::from_fn(|i, _| self.gamma[axes[i]])
    }
}

/// Surface points with outward normals and area weights.
fn surface_nodes(g: &Geometry) -> Vec<(Vector3<f64>, Vector3<f64>, f64)> {
    let az = GaussLegendre::new(AZIMUTH_NODES);
    let line = GaussLegendre::new(LINE_NODES);
    let mut out = Vec::new();
    match *g {
        Geometry::Cylindroid { a, b, length } => {
            let h = 0.5 * length;
            for quarter in 0..4 {
                let p0 = 0.5 * PI * quarter as f64;
                for (phi, wp) in az.mapped(p0, p0 + 0.5 * PI) {
                    let (s, c) = phi.sin_cos();
                    let jac = (a * a * s * s + b * b * c * c).sqrt();
                    let n = Vector3::new(b * c, a * s, 0.0) / jac;
                    for (z, wz) in line.mapped(-h, h) {
                        out.push((Vector3::new(a * c, b * s, z), n, wp * wz * jac));
                    }
                    // end caps: x = a rho cos, y = b rho sin, dA = a b rho
                    for (rho, wr) in line.mapped(0.0, 1.0) {
                        for sign in [-1.0, 1.0] {
                            out.push((
                                Vector3::new(a * rho * c, b * rho * s, sign * h),
                                Vector3::new(0.0, 0.0, sign),
                                wp * wr * a * b * rho,
                            ));
                        }
                    }
                }
            }
        }
        Geometry::Box { a, b, c } => {
            let half = [a, b, c];
            for axis in 0..3 {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                for sign in [-1.0, 1.0] {
                    let mut n = Vector3::zeros();
                    n[axis] = sign;
                    for (x, wx) in line.mapped(-half[u], half[u]) {
                        for (y, wy) in line.mapped(-half[v], half[v]) {
                            let mut r = Vector3::zeros();
                            r[axis] = sign * half[axis];
                            r[u] = x;
                            r[v] = y;
                            out.push((r, n, wx * wy));
                        }
                    }
                }
            }
        }
    }
    out
}

/// `int dA [w_s (r x n)(r x n)^T + alpha_c (r^2 1 - r r^T)]` (m^4).
pub fn surface_damping_integral(g: &Geometry, gas: &GasModel) -> Matrix3<f64> {
    let ws = gas.specular_weight();
    let ac = gas.accommodation;
    let mut acc = Matrix3::zeros();
    for (r, n, w) in surface_nodes(g) {
        let l = r.cross(&n);
        acc += (l * l.transpose() * ws + (Matrix3::identity() * r.norm_squared() - r * r.transpose()) * ac) * w;
    }
    acc
}

/// Damping rates from numerical surface quadrature, `n_g p_g B I^-1`.
pub fn damping_tensor_surface(shape: &BodyShape, props: &MassProperties, gas: &GasModel) -> Result<DampingRates> {
    shape.validate()?;
    gas.validate()?;
    let b = surface_damping_integral(&shape.geometry, gas);
    let scale = gas.number_density() * gas.momentum_scale();
    let off = (b - Matrix3::from_diagonal(&b.diagonal())).abs().max();
    if off > 1e-6 * b.diagonal().abs().max() {
        return Err(Error::Quadrature { estimate: off, tolerance: 1e-6 * b.diagonal().abs().max() });
    }
    Ok(DampingRates { gamma: Vector3::from_fn(|i, _| scale * b[(i, i)] / props.inertia[i]) })
}

/// Closed-form cylindroid rates.
pub fn damping_rates_closed_form(shape: &BodyShape, props: &MassProperties, gas: &GasModel) -> Result<DampingRates> {
    shape.validate()?;
    gas.validate()?;
    let Geometry::Cylindroid { a, b, length: l } = shape.geometry else {
        return Err(Error::InvalidShape("closed-form damping rates require a cylindroid".into()));
    };
    let eta = gas.eta();
    let ac = gas.accommodation;
    let qbar = shape.geometry.surface_second_moments()?;
    let a2_ba = shape_integral(ShapeIntegral::A2, b / a)?;
    let a2_ab = shape_integral(ShapeIntegral::A2, a / b)?;
    let a3_ba = shape_integral(ShapeIntegral::A3, b / a)?;
    let scale = gas.number_density() * gas.momentum_scale();
    let i = props.inertia;
    let g1 = scale / i[0] * (eta * (l.powi(3) * a * a2_ba / 6.0 + a * b.powi(3)) + ac * (qbar[1] + qbar[2]));
    let g2 = scale / i[1] * (eta * (l.powi(3) * b * a2_ab / 6.0 + a.powi(3) * b) + ac * (qbar[0] + qbar[2]));
    let g3 = scale / i[2] * (eta * (l / (2.0 * a)) * (a * a - b * b).powi(2) * a3_ba + ac * (qbar[0] + qbar[1]));
    Ok(DampingRates { gamma: Vector3::new(g1, g2, g3) })
}

/// `(dE/dt)_gas = k_B T_gas Gamma / 2` (J/s).
pub fn heating_rate(gamma: f64, t_gas: f64) -> f64 {
    0.5 * BOLTZMANN * t_gas * gamma
}

/// `T_ss = Gamma_gas / (Gamma_gas + Gamma_damp) T_gas`.
pub fn steady_state_temperature(gamma_gas: f64, gamma_damp: f64, t_gas: f64) -> Result<f64> {
    let total = gamma_gas + gamma_damp;
    if !(total > 0.0) {
        return Err(Error::NoSteadyState(total));
    }
    Ok(gamma_gas / total * t_gas)
}

/// Per-mode steady states for gas rates and feedback rates given per mode.
pub fn steady_state_modes(gas_rates: &Vector3<f64>, damp_rates: &Vector3<f64>, t_gas: f64) -> Result<Vector3<f64>> {
    let mut out = Vector3::zeros();
    for i in 0..3 {
        out[i] = steady_state_temperature(gas_rates[i], damp_rates[i], t_gas)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::mass_properties;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn cylinder_has_no_specular_axial_damping() {
        let s = BodyShape::cylindroid(30e-9, 30e-9, 100e-9);
        let p = mass_properties(&s).unwrap();
        let gas = GasModel::from_torr(1e-9, 300.0).with_accommodation(0.0);
        let r = damping_tensor_surface(&s, &p, &gas).unwrap();
        assert!(r.gamma[2].abs() < 1e-12 * r.gamma[0]);
        assert!(rel(r.gamma[0], r.gamma[1]) < 1e-12);
        assert!((gas.eta() - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let s = BodyShape::cylindroid(26.8e-9, 33.5e-9, 100e-9);
        let p = mass_properties(&s).unwrap();
        for ac in [0.0, 0.4, 1.0] {
            let gas = GasModel::from_torr(1e-9, 300.0).with_accommodation(ac);
            let q = damping_tensor_surface(&s, &p, &gas).unwrap();
            let c = damping_rates_closed_form(&s, &p, &gas).unwrap();
            for i in 0..3 {
                assert!(rel(c.gamma[i], q.gamma[i]) < 1e-6, "alpha_c {ac} axis {i}: {} vs {}", c.gamma[i], q.gamma[i]);
            }
        }
    }

    #[test]
    fn rates_are_linear_in_pressure() {
        let s = BodyShape::cuboid(20e-9, 30e-9, 50e-9);
        let p = mass_properties(&s).unwrap();
        let g1 = damping_tensor_surface(&s, &p, &GasModel::new(1e-7, 300.0)).unwrap();
        let g2 = damping_tensor_surface(&s, &p, &GasModel::new(2e-7, 300.0)).unwrap();
        for i in 0..3 {
            assert!(rel(g2.gamma[i], 2.0 * g1.gamma[i]) < 1e-12);
        }
    }

    #[test]
    fn steady_state_limits() {
        assert_eq!(steady_state_temperature(1.0, 0.0, 300.0).unwrap(), 300.0);
        assert_eq!(steady_state_temperature(2.0, 2.0, 300.0).unwrap(), 150.0);
        assert!(matches!(steady_state_temperature(0.0, 0.0, 300.0), Err(Error::NoSteadyState(_))));
        assert_eq!(heating_rate(0.0, 300.0), 0.0);
        assert!(rel(heating_rate(3.0, 600.0), 2.0 * heating_rate(3.0, 300.0)) < 1e-15);
    }

    #[test]
    fn invalid_gas_is_rejected() {
        let s = BodyShape::cylindroid(30e-9, 30e-9, 100e-9);
        let p = mass_properties(&s).unwrap();
        let gas = GasModel::new(1e-7, 300.0).with_accommodation(1.5);
        assert!(damping_tensor_surface(&s, &p, &gas).is_err());
        assert!(damping_rates_closed_form(&BodyShape::cuboid(1e-9, 1e-9, 1e-9), &p, &GasModel::new(1.0, 1.0)).is_err());
    }
}
