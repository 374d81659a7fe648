//! Particle geometry, mass properties and surface-charge multipole moments.
//!
//! Body axes follow the particle's reflection planes. For a cylindroid the
//! axes `n1`, `n2` lie along the elliptic semi-axes `a`, `b` and `n3` along
//! the height. The charge is spread uniformly over the whole surface
//! (lateral wall and both end caps, or all six box faces).

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::DIAMOND_DENSITY;
use crate::error::{Error, Result};
use crate::quadrature;

const SHAPE_INTEGRAL_TOL: f64 = 1e-10;

/// Geometry of a reflection-symmetric particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Elliptic cylinder with basis semi-axes `a`, `b` and height `length` (m).
    Cylindroid { a: f64, b: f64, length: f64 },
    /// Rectangular box with half side-lengths `a`, `b`, `c` (m).
    Box { a: f64, b: f64, c: f64 },
}

impl Geometry {
    /// Cylindroid with `sqrt(a b) = mean_semi_axis` and `b / a = ratio`.
    pub fn cylindroid_with_ratio(mean_semi_axis: f64, ratio: f64, length: f64) -> Self {
        let a = mean_semi_axis / ratio.sqrt();
        Geometry::Cylindroid { a, b: a * ratio, length }
    }

    /// Cylindroid of given volume with `b / a = ratio` and `L / 2b = l_over_2b`.
    pub fn cylindroid_fixed_volume(volume: f64, ratio: f64, l_over_2b: f64) -> Self {
        // V = pi (b / ratio) b (2 b l_over_2b)
        let b = (volume * ratio / (2.0 * PI * l_over_2b)).cbrt();
        Geometry::Cylindroid { a: b / ratio, b, length: 2.0 * b * l_over_2b }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Geometry::Cylindroid { a, b, length } => PI * a * b * length,
            Geometry::Box { a, b, c } => 8.0 * a * b * c,
        }
    }

    /// Total surface area including end caps.
    pub fn surface_area(&self) -> Result<f64> {
        Ok(match *self {
            Geometry::Cylindroid { a, b, length } => {
                2.0 * PI * a * b + PI * (a + b) * shape_integral(ShapeIntegral::A0, a / b)? * length
            }
            Geometry::Box { a, b, c } => 8.0 * (a * b + b * c + a * c),
        })
    }

    /// Second surface moments `int x_j^2 dA` over the whole surface (m^4).
    ///
    /// These are the quadrupole moments divided by the surface charge density.
    pub fn surface_second_moments(&self) -> Result<Vector3<f64>> {
        Ok(match *self {
            Geometry::Cylindroid { a, b, length } => {
                let a1_ba = shape_integral(ShapeIntegral::A1, b / a)?;
                let a1_ab = shape_integral(ShapeIntegral::A1, a / b)?;
                let a0 = shape_integral(ShapeIntegral::A0, a / b)?;
                Vector3::new(
                    0.5 * PI * a * a * (length * (a + b) * a1_ba + a * b),
                    0.5 * PI * b * b * (length * (a + b) * a1_ab + a * b),
                    0.5 * PI * length * length * ((a + b) * a0 * length / 6.0 + a * b),
                )
            }
            Geometry::Box { a, b, c } => {
                let f = 8.0 / 3.0;
                Vector3::new(
                    f * a * a * (a * b + a * c + 3.0 * b * c),
                    f * b * b * (a * b + 3.0 * a * c + b * c),
                    f * c * c * (3.0 * a * b + a * c + b * c),
                )
            }
        })
    }

    fn validate(&self) -> Result<()> {
        let dims: [(&str, f64); 3] = match *self {
            Geometry::Cylindroid { a, b, length } => [("a", a), ("b", b), ("length", length)],
            Geometry::Box { a, b, c } => [("a", a), ("b", b), ("c", c)],
        };
        for (name, v) in dims {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidShape(format!("dimension {name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Uniform dilation of all lengths.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Geometry::Cylindroid { a, b, length } => {
                Geometry::Cylindroid { a: a * factor, b: b * factor, length: length * factor }
            }
            Geometry::Box { a, b, c } => Geometry::Box { a: a * factor, b: b * factor, c: c * factor },
        }
    }
}

/// A charged particle: geometry, mass density and charge distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyShape {
    pub geometry: Geometry,
    /// Mass density (kg/m^3).
    pub density: f64,
    /// Total charge (C).
    pub charge: f64,
    /// Offset of the charge centre from the mass centre, body frame (m).
    pub charge_offset: Vector3<f64>,
}

impl BodyShape {
    pub fn new(geometry: Geometry) -> Self {
        Self { geometry, density: DIAMOND_DENSITY, charge: 0.0, charge_offset: Vector3::zeros() }
    }

    pub fn cylindroid(a: f64, b: f64, length: f64) -> Self {
        Self::new(Geometry::Cylindroid { a, b, length })
    }

    pub fn cuboid(a: f64, b: f64, c: f64) -> Self {
        Self::new(Geometry::Box { a, b, c })
    }

    pub fn with_charge(mut self, charge: f64) -> Self {
        self.charge = charge;
        self
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.density = density;
        self
    }

    pub fn with_charge_offset(mut self, offset: Vector3<f64>) -> Self {
        self.charge_offset = offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::InvalidShape(format!("density must be positive, got {}", self.density)));
        }
        if !self.charge.is_finite() || self.charge_offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidShape("charge parameters must be finite".into()));
        }
        Ok(())
    }

    /// Dilates all lengths by `factor`, keeping density and rescaling the
    /// charge so that the charge-to-mass ratio is preserved.
    pub fn dilated_fixed_charge_to_mass(&self, factor: f64) -> Self {
        Self {
            geometry: self.geometry.scaled(factor),
            density: self.density,
            charge: self.charge * factor.powi(3),
            charge_offset: self.charge_offset * factor,
        }
    }
}

/// Mass and principal moments of inertia.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    /// Mass (kg).
    pub mass: f64,
    /// Principal moments `(I1, I2, I3)` (kg m^2).
    pub inertia: Vector3<f64>,
}

/// Charge multipole moments about the centre of mass, body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeMoments {
    /// Total charge (C).
    pub charge: f64,
    /// Dipole moment (C m).
    pub dipole: Vector3<f64>,
    /// Second moment tensor `int rho r_j r_l` (C m^2).
    pub quadrupole: Matrix3<f64>,
    /// Surface charge density (C/m^2).
    pub surface_density: f64,
}

impl ChargeMoments {
    /// Diagonal of the quadrupole tensor.
    pub fn diagonal(&self) -> Vector3<f64> {
        self.quadrupole.diagonal()
    }
}

pub fn mass_properties(shape: &BodyShape) -> Result<MassProperties> {
    shape.validate()?;
    let mass = shape.density * shape.geometry.volume();
    let inertia = match shape.geometry {
        Geometry::Cylindroid { a, b, length } => {
            let l2 = length * length / 3.0;
            Vector3::new(b * b + l2, a * a + l2, a * a + b * b) * (0.25 * mass)
        }
        Geometry::Box { a, b, c } => Vector3::new(b * b + c * c, a * a + c * c, a * a + b * b) * (mass / 3.0),
    };
    Ok(MassProperties { mass, inertia })
}

pub fn charge_moments(shape: &BodyShape) -> Result<ChargeMoments> {
    shape.validate()?;
    let area = shape.geometry.surface_area()?;
    let surface_density = shape.charge / area;
    let second = shape.geometry.surface_second_moments()? * surface_density;
    let d = shape.charge_offset;
    let quadrupole = Matrix3::from_diagonal(&second) + d * d.transpose() * shape.charge;
    Ok(ChargeMoments { charge: shape.charge, dipole: d * shape.charge, quadrupole, surface_density })
}

/// The dimensionless elliptic shape integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeIntegral {
    /// Ellipse perimeter normalised by `pi (a + b)`, argument `a / b`.
    A0,
    /// Lateral-wall second moment factor.
    A1,
    /// Specular gas-torque factor for transverse axes.
    A2,
    /// Specular gas-torque factor for the height axis.
    A3,
}

/// Evaluates one of the shape integrals at ratio `r > 0`.
pub fn shape_integral(kind: ShapeIntegral, r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("shape integral ratio must be positive, got {r}")));
    }
    let r2 = r * r;
    // All integrands depend only on sin^2 and cos^2, so one quadrant suffices.
    let quadrant =
        |f: &dyn Fn(f64) -> f64| quadrature::integrate(f, 0.0, 0.5 * PI, 0.25 * SHAPE_INTEGRAL_TOL).map(|v| 4.0 * v);
    Ok(match kind {
        ShapeIntegral::A0 => quadrant(&|p: f64| (r2 * p.sin().powi(2) + p.cos().powi(2)).sqrt())? / (PI * (1.0 + r)),
        ShapeIntegral::A1 => {
            let f = |p: f64| {
                let (s, c) = p.sin_cos();
                (s * s + r2 * c * c).sqrt() * c * c
            };
            2.0 * quadrant(&f)? / (PI * (1.0 + r))
        }
        ShapeIntegral::A2 => {
            let f = |p: f64| {
                let (s, c) = p.sin_cos();
                s * s / (s * s + r2 * c * c).sqrt()
            };
            quadrant(&f)? / PI
        }
        ShapeIntegral::A3 => {
            let f = |p: f64| {
                let (s, c) = p.sin_cos();
                (2.0 * p).sin().powi(2) / (s * s + r2 * c * c).sqrt()
            };
            quadrant(&f)? / PI
        }
    })
}
