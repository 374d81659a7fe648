//! Euler-angle algebra in the z-y'-z'' convention.
//!
//! `R(alpha, beta, gamma) = Rz(alpha) Ry(beta) Rz(gamma)` maps body-frame
//! coordinates to the lab frame. The body-frame angular velocity is
//! `omega = T(phi) phi_dot`, with `[omega]x = R^T dR/dt`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum `|sin(beta)|` accepted by [`t_inverse`].
pub const BETA_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EulerAngles {
    pub const fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.alpha, self.beta, self.gamma)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.beta.is_finite() && self.gamma.is_finite()
    }

    /// Equivalent angles in `(-pi, pi] x [0, pi] x (-pi, pi]`.
    pub fn canonical(&self) -> Self {
        let wrap = |x: f64| {
            let y = (x + PI).rem_euclid(2.0 * PI) - PI;
            if y == -PI {
                PI
            } else {
                y
            }
        };
        let mut beta = wrap(self.beta);
        let (mut alpha, mut gamma) = (self.alpha, self.gamma);
        if beta < 0.0 {
            // Rz(a) Ry(-b) Rz(g) = Rz(a + pi) Ry(b) Rz(g + pi)
            beta = -beta;
            alpha += PI;
            gamma += PI;
        }
        Self::new(wrap(alpha), beta, wrap(gamma))
    }
}

impl std::ops::Index<usize> for EulerAngles {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.alpha,
            1 => &self.beta,
            2 => &self.gamma,
            _ => panic!("Euler angle index {i} out of range"),
        }
    }
}

fn rz(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn ry(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rotation_from_euler(phi: &EulerAngles) -> Rotation3<f64> {
    Rotation3::from_matrix_unchecked(rz(phi.alpha) * ry(phi.beta) * rz(phi.gamma))
}

/// The map from Euler-angle rates to body-frame angular velocity.
pub fn t_matrix(phi: &EulerAngles) -> Matrix3<f64> {
    let (sb, cb) = phi.beta.sin_cos();
    let (sg, cg) = phi.gamma.sin_cos();
    Matrix3::new(
        -sb * cg,
        sg,
        0.0, //
        sb * sg,
        cg,
        0.0, //
        cb,
        0.0,
        1.0,
    )
}

/// Closed-form inverse of [`t_matrix`]; fails near `sin(beta) = 0`.
pub fn t_inverse(phi: &EulerAngles) -> Result<Matrix3<f64>> {
    let (sb, cb) = phi.beta.sin_cos();
    if sb.abs() <= BETA_TOL {
        return Err(Error::GimbalSingularity { sin_beta: sb.abs(), tolerance: BETA_TOL });
    }
    let (sg, cg) = phi.gamma.sin_cos();
    Ok(Matrix3::new(
        -cg / sb,
        sg / sb,
        0.0, //
        sg,
        cg,
        0.0, //
        cg * cb / sb,
        -sg * cb / sb,
        1.0,
    ))
}

/// Skew-symmetric matrix with `hat(v) w = v x w`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

/// `R^T dR/dphi_j` for each Euler angle, i.e. `hat` of the j-th column of T.
pub fn body_generators(phi: &EulerAngles) -> [Matrix3<f64>; 3] {
    let t = t_matrix(phi);
    [0, 1, 2].map(|j| hat(&t.column(j).into_owned()))
}
