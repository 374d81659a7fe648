//! Run configuration: a TOML file whose sections mirror the model inputs.
//!
//! Every section and key is optional and defaults to the reference
//! configuration (30 nm cylinder of 100 nm height, 100 e, 100 V at
//! 250 kHz). Unknown keys are rejected. Quantities accept SI numbers or
//! `"value unit"` strings, see [`crate::units`].

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use librotrap::constants::{AIR_MOLECULE_MASS, DIAMOND_DENSITY, ELEMENTARY_CHARGE, NV_MAGNETIC_MOMENT};
use librotrap::cooling::FeedbackConfig;
use librotrap::interferometry::GridSettings;
use librotrap::{BodyShape, GasModel, Geometry, InterferometerConfig, Mode, TrapConfig};

use crate::units::*;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub particle: ParticleSection,
    pub trap: TrapSection,
    pub gas: GasSection,
    pub feedback: FeedbackSection,
    pub sim: SimSection,
    pub interferometer: InterferometerSection,
    pub sweep: Option<SweepSection>,
    pub contrast: ContrastSection,
}

/// Particle geometry. `cylindroid_ratio` fixes `sqrt(a b)` and `b / a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Cylindroid { a: Length, b: Length, length: Length },
    CylindroidRatio { mean_semi_axis: Length, ratio: f64, length: Length },
    Box { a: Length, b: Length, c: Length },
}

impl ShapeSpec {
    pub fn geometry(&self) -> Geometry {
        match *self {
            ShapeSpec::Cylindroid { a, b, length } => Geometry::Cylindroid { a: a.si, b: b.si, length: length.si },
            ShapeSpec::CylindroidRatio { mean_semi_axis, ratio, length } => {
                Geometry::cylindroid_with_ratio(mean_semi_axis.si, ratio, length.si)
            }
            ShapeSpec::Box { a, b, c } => Geometry::Box { a: a.si, b: b.si, c: c.si },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticleSection {
    pub shape: ShapeSpec,
    pub density: Density,
    pub charge: Charge,
}

impl Default for ParticleSection {
    fn default() -> Self {
        Self {
            shape: ShapeSpec::CylindroidRatio {
                mean_semi_axis: Length::si(30e-9),
                ratio: 1.0,
                length: Length::si(100e-9),
            },
            density: Density::si(DIAMOND_DENSITY),
            charge: Charge::si(100.0 * ELEMENTARY_CHARGE),
        }
    }
}

impl ParticleSection {
    pub fn body(&self) -> BodyShape {
        self.body_with(self.shape.geometry())
    }

    pub fn body_with(&self, geometry: Geometry) -> BodyShape {
        BodyShape::new(geometry).with_density(self.density.si).with_charge(self.charge.si)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    #[serde(rename = "U_DC")]
    pub u_dc: Voltage,
    #[serde(rename = "U_AC")]
    pub u_ac: Voltage,
    #[serde(rename = "f_AC")]
    pub f_ac: Frequency,
    pub l0: Length,
    pub kappa: [f64; 3],
}

impl Default for TrapSection {
    fn default() -> Self {
        Self {
            u_dc: Voltage::si(0.0),
            u_ac: Voltage::si(100.0),
            f_ac: Frequency::si(250e3),
            l0: Length::si(100e-6),
            kappa: [-0.95, -1.05, 2.0],
        }
    }
}

impl TrapSection {
    pub fn trap(&self) -> TrapConfig {
        TrapConfig {
            u_dc: self.u_dc.si,
            u_ac: self.u_ac.si,
            omega_ac: 2.0 * PI * self.f_ac.si,
            l0: self.l0.si,
            kappa: self.kappa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasSection {
    pub pressure: Pressure,
    #[serde(rename = "T")]
    pub temperature: Temperature,
    /// Accommodation coefficient used by `simulate` and `cool`; the
    /// steady-state sweep always reports both limits.
    pub alpha_c: f64,
    pub m_g: Mass,
    /// Surface temperature; defaults to the gas temperature.
    #[serde(rename = "T_s")]
    pub surface_temperature: Option<Temperature>,
}

impl Default for GasSection {
    fn default() -> Self {
        Self {
            pressure: Pressure::si(librotrap::constants::TORR * 1e-9),
            temperature: Temperature::si(300.0),
            alpha_c: 1.0,
            m_g: Mass::si(AIR_MOLECULE_MASS),
            surface_temperature: None,
        }
    }
}

impl GasSection {
    pub fn model(&self, alpha_c: f64) -> GasModel {
        let mut g = GasModel::new(self.pressure.si, self.temperature.si).with_accommodation(alpha_c);
        g.molecule_mass = self.m_g.si;
        g.surface_temperature = self.surface_temperature.map_or(self.temperature.si, |t| t.si);
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackSection {
    pub window: Time,
    pub delta: f64,
    /// Band-pass half-width as a fraction of the expected frequency.
    pub band: f64,
    pub min_cycles: f64,
    pub modes: Vec<Mode>,
    /// Extra modulation phase (rad); `pi` turns damping into anti-damping.
    pub phase_offset: f64,
}

impl Default for FeedbackSection {
    fn default() -> Self {
        let d = FeedbackConfig::default();
        Self {
            window: Time::si(d.window),
            delta: d.delta,
            band: d.band_halfwidth,
            min_cycles: d.min_cycles,
            modes: d.modes,
            phase_offset: d.phase_offset,
        }
    }
}

impl FeedbackSection {
    pub fn feedback(&self) -> FeedbackConfig {
        FeedbackConfig {
            window: self.window.si,
            delta: self.delta,
            band_halfwidth: self.band,
            min_cycles: self.min_cycles,
            modes: self.modes.clone(),
            phase_offset: self.phase_offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub dt_per_period: usize,
    pub t_end: Time,
    pub seed: u64,
    /// Mode displaced at t = 0 and its amplitude (rad).
    pub excite_mode: Mode,
    pub excite_amplitude: f64,
    /// Keep every n-th integrator step in the trajectory output.
    pub record_stride: usize,
    /// Apply gas damping and matching thermal kicks in `simulate`.
    pub thermal: bool,
    /// Centre-of-mass offset from the trap centre at t = 0.
    pub initial_position: [Length; 3],
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt_per_period: 100,
            t_end: Time::si(5e-3),
            seed: 0,
            excite_mode: Mode::Beta,
            excite_amplitude: 0.1,
            record_stride: 10,
            thermal: false,
            initial_position: [Length::si(0.0); 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferometerSection {
    #[serde(rename = "M")]
    pub mass: Mass,
    pub a_minus: f64,
    pub g_par: Acceleration,
    #[serde(rename = "Tp")]
    pub t_p: Time,
    #[serde(rename = "B")]
    pub b_field: Field,
    #[serde(rename = "I_axis")]
    pub i_axis: Inertia,
    pub n_max: Option<usize>,
}

impl SimSection {
    pub fn initial_state(&self, eq: &librotrap::EulerAngles) -> librotrap::RigidBodyState {
        let mut s = librotrap::cooling::excited_state(eq, self.excite_mode, self.excite_amplitude);
        s.position = nalgebra::Vector3::from_fn(|i, _| self.initial_position[i].si);
        s
    }
}

impl Default for InterferometerSection {
    fn default() -> Self {
        let d = InterferometerConfig::default();
        Self {
            mass: Mass::si(d.mass),
            a_minus: d.a_minus,
            g_par: Acceleration::si(d.g_par),
            t_p: Time::si(d.t_p),
            b_field: Field::si(d.b_field),
            i_axis: Inertia::si(d.i_axis),
            n_max: d.n_max,
        }
    }
}

impl InterferometerSection {
    pub fn config(&self) -> InterferometerConfig {
        InterferometerConfig {
            mass: self.mass.si,
            a_minus: self.a_minus,
            g_par: self.g_par.si,
            t_p: self.t_p.si,
            b_field: self.b_field.si,
            mu: NV_MAGNETIC_MOMENT,
            i_axis: self.i_axis.si,
            n_max: self.n_max,
            grid: GridSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// `b / a` at fixed `sqrt(a b)` and height.
    BOverA,
    /// `L / 2b` at fixed volume and `b / a`.
    #[serde(rename = "l_over_2b")]
    LOver2b,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepSection {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.start + step * k as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContrastSection {
    #[serde(rename = "omegaB_Tp")]
    pub omega_b_tp: Vec<f64>,
    pub t_min: Temperature,
    pub t_max: Temperature,
    pub points: usize,
    /// Contrast for which the required temperature is reported.
    pub target: Option<f64>,
}

impl Default for ContrastSection {
    fn default() -> Self {
        Self {
            omega_b_tp: vec![0.0375],
            t_min: Temperature::si(1e-7),
            t_max: Temperature::si(1e-4),
            points: 31,
            target: None,
        }
    }
}

impl ContrastSection {
    /// Log-spaced temperatures from `t_min` to `t_max`.
    pub fn temperatures(&self) -> Vec<f64> {
        let (lo, hi) = (self.t_min.si.ln(), self.t_max.si.ln());
        if self.points == 1 {
            return vec![self.t_min.si];
        }
        (0..self.points).map(|k| (lo + (hi - lo) * k as f64 / (self.points - 1) as f64).exp()).collect()
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(format!("{origin}: {e}")))?;
        cfg.check().map_err(|e| ConfigError(format!("{origin}: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Cross-field checks that serde cannot express.
    fn check(&self) -> Result<(), String> {
        if self.sim.dt_per_period < 50 {
            return Err(format!("sim.dt_per_period must be at least 50, got {}", self.sim.dt_per_period));
        }
        if self.sim.record_stride == 0 {
            return Err("sim.record_stride must be at least 1".into());
        }
        if !(self.sim.t_end.si > 0.0) {
            return Err(format!("sim.t_end must be positive, got {} s", self.sim.t_end.si));
        }
        if !(0.0..=1.0).contains(&self.gas.alpha_c) {
            return Err(format!("gas.alpha_c must lie in [0, 1], got {}", self.gas.alpha_c));
        }
        if let Some(s) = &self.sweep {
            if s.points == 0 {
                return Err("sweep.points must be at least 1".into());
            }
            if !(s.start > 0.0 && s.stop > 0.0) {
                return Err("sweep.start and sweep.stop must be positive".into());
            }
        }
        let c = &self.contrast;
        if c.points == 0 || !(c.t_min.si > 0.0 && c.t_max.si >= c.t_min.si) {
            return Err("contrast needs points >= 1 and 0 < t_min <= t_max".into());
        }
        if c.omega_b_tp.is_empty() || c.omega_b_tp.iter().any(|&w| !(w > 0.0)) {
            return Err("contrast.omegaB_Tp must be a non-empty list of positive values".into());
        }
        if let Some(t) = c.target {
            if !(t > 0.0 && t < 1.0) {
                return Err(format!("contrast.target must lie in (0, 1), got {t}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("", "test").unwrap(), RunConfig::default());
    }

    #[test]
    fn units_are_converted() {
        let cfg = RunConfig::from_toml(
            r#"
            [particle]
            shape = { kind = "cylindroid", a = "26.8 nm", b = "33.5 nm", length = "100 nm" }
            [trap]
            f_AC = "250 kHz"
            [gas]
            pressure = "1e-9 Torr"
            [interferometer]
            B = "10 G"
            "#,
            "test",
        )
        .unwrap();
        assert_eq!(cfg.trap.f_ac.si, 2.5e5);
        assert!((cfg.interferometer.b_field.si - 1e-3).abs() < 1e-18);
        match cfg.particle.shape.geometry() {
            Geometry::Cylindroid { a, .. } => assert!((a - 26.8e-9).abs() < 1e-20),
            g => panic!("{g:?}"),
        }
    }

    #[test]
    fn unknown_keys_report_the_line() {
        let err = RunConfig::from_toml("[trap]\nU_AC = 100\nvoltage = 3\n", "cfg.toml").unwrap_err();
        assert!(err.0.contains("line 3") && err.0.contains("voltage"), "{err}");
        let err =
            RunConfig::from_toml("[particle]\nshape = { kind = \"box\", a = 1, b = 1, c = 1, d = 2 }\n", "cfg.toml")
                .unwrap_err();
        assert!(err.0.contains("unknown field"), "{err}");
        let err = RunConfig::from_toml("[trap]\nl0 = \"100 Torr\"\n", "cfg.toml").unwrap_err();
        assert!(err.0.contains("line 2") && err.0.contains("length unit"), "{err}");
    }
}
