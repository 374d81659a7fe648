//! Quadrupole Paul-trap field and the feedback-modulated drive.
//!
//! The potential is `V(r) = U(t) / (2 l0^2) * sum_i kappa_i r_i^2` with
//! `sum_i kappa_i = 0`. Modulation channels scale the AC amplitude only:
//! `U(t) = U_DC + U_AC [1 + sum_k delta_k sin(w_k t + p_k)] cos(Omega t)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{rotation_from_euler, EulerAngles};

/// Tolerance on the Laplace condition `sum kappa = 0`.
pub const LAPLACE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// DC voltage (V).
    pub u_dc: f64,
    /// AC voltage amplitude (V).
    pub u_ac: f64,
    /// RF angular frequency (rad/s).
    pub omega_ac: f64,
    /// Electrode length scale (m).
    pub l0: f64,
    /// Dimensionless curvatures along lab x, y, z.
    pub kappa: [f64; 3],
}

impl TrapConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.kappa.iter().sum();
        if sum.abs() > LAPLACE_TOL {
            return Err(Error::InvalidTrap(format!("curvatures must sum to zero (Laplace condition), sum = {sum:e}")));
        }
        if !(self.omega_ac.is_finite() && self.omega_ac > 0.0) {
            return Err(Error::InvalidTrap(format!("omega_ac must be positive, got {}", self.omega_ac)));
        }
        if !(self.l0.is_finite() && self.l0 > 0.0) {
            return Err(Error::InvalidTrap(format!("l0 must be positive, got {}", self.l0)));
        }
        if !self.u_dc.is_finite() || !self.u_ac.is_finite() {
            return Err(Error::InvalidTrap("voltages must be finite".into()));
        }
        Ok(())
    }

    /// Asymmetry `(kappa_y - kappa_x) / 2`, for reporting only.
    pub fn epsilon(&self) -> f64 {
        0.5 * (self.kappa[1] - self.kappa[0])
    }

    pub fn rf_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega_ac
    }

    pub fn kappa_vector(&self) -> Vector3<f64> {
        Vector3::from(self.kappa)
    }

    /// Lab axis with the smallest `|kappa|` (weakest confinement).
    pub fn weakest_axis(&self) -> usize {
        (0..3).min_by(|&i, &j| self.kappa[i].abs().total_cmp(&self.kappa[j].abs())).unwrap_or(0)
    }
}

/// Which librational mode a modulation channel acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Alpha,
    Beta,
    Gamma,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Alpha, Mode::Beta, Mode::Gamma];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Alpha => "alpha",
            Mode::Beta => "beta",
            Mode::Gamma => "gamma",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Mode::Alpha),
            "beta" => Ok(Mode::Beta),
            "gamma" => Ok(Mode::Gamma),
            other => Err(Error::InvalidParameter(format!("unknown mode '{other}'"))),
        }
    }
}

/// One sinusoidal modulation of the AC amplitude, active on `[t_start, t_stop)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationChannel {
    pub depth: f64,
    pub omega: f64,
    pub phase: f64,
    pub t_start: f64,
    pub t_stop: f64,
    pub mode: Option<Mode>,
}

impl ModulationChannel {
    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_stop
    }

    pub fn factor(&self, t: f64) -> f64 {
        if self.is_active(t) {
            self.depth * (self.omega * t + self.phase).sin()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveWaveform {
    pub base: TrapConfig,
    pub channels: Vec<ModulationChannel>,
}

impl DriveWaveform {
    pub fn new(base: TrapConfig) -> Self {
        Self { base, channels: Vec::new() }
    }

    pub fn with_channel(mut self, channel: ModulationChannel) -> Result<Self> {
        self.push_channel(channel)?;
        Ok(self)
    }

    pub fn push_channel(&mut self, channel: ModulationChannel) -> Result<()> {
        if !(channel.depth.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "modulation depth must satisfy |delta| < 1, got {}",
                channel.depth
            )));
        }
        self.channels.push(channel);
        Ok(())
    }

    /// Inserts or replaces the channel driving `mode`.
    pub fn set_mode_channel(&mut self, mode: Mode, channel: ModulationChannel) -> Result<()> {
        self.channels.retain(|c| c.mode != Some(mode));
        self.push_channel(ModulationChannel { mode: Some(mode), ..channel })
    }

    pub fn channel_for(&self, mode: Mode) -> Option<&ModulationChannel> {
        self.channels.iter().find(|c| c.mode == Some(mode))
    }

    /// Relative AC amplitude `1 + sum delta_k sin(...)`.
    pub fn ac_scale(&self, t: f64) -> f64 {
        1.0 + self.channels.iter().map(|c| c.factor(t)).sum::<f64>()
    }

    pub fn voltage(&self, t: f64) -> f64 {
        self.base.u_dc + self.base.u_ac * self.ac_scale(t) * (self.base.omega_ac * t).cos()
    }

    pub fn potential(&self, r: &Vector3<f64>, t: f64) -> f64 {
        let k = self.base.kappa;
        let s = k[0] * r[0] * r[0] + k[1] * r[1] * r[1] + k[2] * r[2] * r[2];
        self.voltage(t) * s / (2.0 * self.base.l0 * self.base.l0)
    }

    pub fn field(&self, r: &Vector3<f64>, t: f64) -> Vector3<f64> {
        field_at_voltage(&self.base, r, self.voltage(t))
    }

    /// Lab-frame field gradient `d E_i / d r_j` (diagonal for a quadrupole).
    pub fn gradient_tensor_lab(&self, t: f64) -> Matrix3<f64> {
        gradient_lab_at_voltage(&self.base, self.voltage(t))
    }

    pub fn gradient_tensor_body(&self, phi: &EulerAngles, t: f64) -> Matrix3<f64> {
        gradient_body_at_voltage(&self.base, phi, self.voltage(t))
    }
}

pub fn field_at_voltage(trap: &TrapConfig, r: &Vector3<f64>, u: f64) -> Vector3<f64> {
    let s = -u / (trap.l0 * trap.l0);
    Vector3::new(s * trap.kappa[0] * r[0], s * trap.kappa[1] * r[1], s * trap.kappa[2] * r[2])
}

pub fn gradient_lab_at_voltage(trap: &TrapConfig, u: f64) -> Matrix3<f64> {
    Matrix3::from_diagonal(&trap.kappa_vector()) * (-u / (trap.l0 * trap.l0))
}

/// `K = -(U / l0^2) R^T diag(kappa) R`.
pub fn gradient_body_at_voltage(trap: &TrapConfig, phi: &EulerAngles, u: f64) -> Matrix3<f64> {
    let r = rotation_from_euler(phi);
    let m = r.matrix();
    let k = m.transpose() * gradient_lab_at_voltage(trap, u) * m;
    // Symmetrise to remove rounding asymmetry.
    (k + k.transpose()) * 0.5
}
