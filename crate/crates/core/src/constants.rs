//! CODATA 2018 exact/recommended values in SI units.

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// One Torr in pascal.
pub const TORR: f64 = 133.322;
/// One gauss in tesla.
pub const GAUSS: f64 = 1e-4;
/// Mass density of diamond (kg/m^3).
pub const DIAMOND_DENSITY: f64 = 3510.0;
/// Mean mass of an air molecule (kg).
pub const AIR_MOLECULE_MASS: f64 = 4.8e-26;
/// NV electron spin magnetic moment, h x 2.8 MHz/G, in J/T.
pub const NV_MAGNETIC_MOMENT: f64 = PLANCK * 2.8e6 / GAUSS;
/// NV zero-field splitting expressed as a frequency (Hz).
pub const NV_ZERO_FIELD_SPLITTING: f64 = 2.87e9;
