//! Stern-Gerlach interferometer phase and the angular contrast of a
//! thermal libration mode.
//!
//! Angles are measured in units of the ground-state width
//! `sigma = sqrt(hbar / (I omega_B))`, momenta in `hbar / sigma` and times in
//! `1 / omega_B`. In these units every quadratic segment is a 2x2 symplectic
//! matrix, and the overlap `<n|U|n>` of the relative evolution follows from
//! its complex parameter `mu = (A + D + i(C - B)) / 2` as
//! `|mu|^-1/2 exp(i n arg mu) P_n(1/|mu|)`.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, GAUSS, HBAR, NV_MAGNETIC_MOMENT, NV_ZERO_FIELD_SPLITTING, PLANCK};
use crate::error::{Error, Result};

/// Thermal weight left outside the truncated sum.
pub const TAIL_TOLERANCE: f64 = 1e-8;
/// Largest automatic eigenstate cutoff.
pub const N_MAX_CAP: usize = 10_000_000;
/// Fraction of the zero-field splitting above which the weak-field
/// approximation is flagged.
pub const WEAK_FIELD_FRACTION: f64 = 0.01;

/// Grid used by the split-step oracle propagator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub points: usize,
    /// Half-width of the grid in ground-state widths.
    pub half_width: f64,
    /// Split-step sub-steps per pulse duration.
    pub steps_per_pulse: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { points: 1024, half_width: 24.0, steps_per_pulse: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerConfig {
    /// Mass (kg).
    pub mass: f64,
    /// Acceleration in the |-> state (m/s^2).
    pub a_minus: f64,
    /// Gravity component along the gradient (m/s^2).
    pub g_par: f64,
    /// Pulse duration (s).
    pub t_p: f64,
    /// Magnetic field magnitude (T).
    pub b_field: f64,
    /// Spin magnetic moment (J/T).
    pub mu: f64,
    /// Moment of inertia about the librating axis (kg m^2).
    pub i_axis: f64,
    /// Eigenstate cutoff; `None` picks the smallest `n` whose thermal tail
    /// is below [`TAIL_TOLERANCE`].
    pub n_max: Option<usize>,
    pub grid: GridSettings,
}

impl Default for InterferometerConfig {
    fn default() -> Self {
        Self {
            mass: 5e-19,
            a_minus: 1.85,
            g_par: 9.8,
            t_p: 4e-6,
            b_field: 10.0 * GAUSS,
            mu: NV_MAGNETIC_MOMENT,
            i_axis: 2.1e-34,
            n_max: None,
            grid: GridSettings::default(),
        }
    }
}

impl InterferometerConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("a_minus", self.a_minus),
            ("t_p", self.t_p),
            ("b_field", self.b_field),
            ("mu", self.mu),
            ("i_axis", self.i_axis),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.g_par.is_finite() {
            return Err(Error::InvalidParameter("g_par must be finite".into()));
        }
        if self.n_max == Some(0) {
            return Err(Error::InvalidParameter("n_max must be positive".into()));
        }
        Ok(())
    }

    pub fn omega_b(&self) -> f64 {
        libration_frequency_b(self.mu, self.b_field, self.i_axis)
    }

    /// Dimensionless pulse duration `omega_B T_p`.
    pub fn omega_b_tp(&self) -> f64 {
        self.omega_b() * self.t_p
    }

    /// Phonon temperature scale `hbar omega_B / k_B` (K).
    pub fn phonon_temperature(&self) -> f64 {
        HBAR * self.omega_b() / BOLTZMANN
    }

    /// Non-fatal diagnostics, currently the weak-field check.
    pub fn warnings(&self) -> Vec<String> {
        let zeeman = self.mu * self.b_field / PLANCK;
        if zeeman > WEAK_FIELD_FRACTION * NV_ZERO_FIELD_SPLITTING {
            vec![format!(
                "Zeeman energy mu B / h = {:.3e} Hz is not small against the zero-field splitting {:.3e} Hz",
                zeeman, NV_ZERO_FIELD_SPLITTING
            )]
        } else {
            Vec::new()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerPhase {
    /// Phase including gravity (rad).
    pub with_gravity: f64,
    /// Phase with `g_par = 0` (rad).
    pub without_gravity: f64,
    /// Maximal path splitting `a_- T_p^2` (m).
    pub splitting: f64,
}

/// `phi_int = (M / hbar) a_- (a_- + 2 g) T_p^3`.
pub fn interferometer_phase(cfg: &InterferometerConfig) -> InterferometerPhase {
    let base = cfg.mass / HBAR * cfg.a_minus * cfg.t_p.powi(3);
    InterferometerPhase {
        with_gravity: base * (cfg.a_minus + 2.0 * cfg.g_par),
        without_gravity: base * cfg.a_minus,
        splitting: cfg.a_minus * cfg.t_p * cfg.t_p,
    }
}

/// `omega_B = sqrt(mu |B| / I)` (rad/s).
pub fn libration_frequency_b(mu: f64, b_field: f64, i_axis: f64) -> f64 {
    (mu * b_field.abs() / i_axis).sqrt()
}

/// Mean occupation `1 / (exp(hbar omega / k_B T) - 1)`.
pub fn mean_phonons(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (BOLTZMANN * temperature)).exp_m1()
}

/// Harmonic segment of duration `theta` (units of `1/omega_B`).
pub fn harmonic_propagator(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, s, -s, c)
}

/// Free segment of duration `theta`.
pub fn free_propagator(theta: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, theta, 0.0, 1.0)
}

/// Path propagators `(S_a, S_b)` for the four-pulse sequence.
pub fn path_propagators(omega_b_tp: f64) -> (Matrix2<f64>, Matrix2<f64>) {
    let t = omega_b_tp;
    let a = harmonic_propagator(t) * free_propagator(2.0 * t) * harmonic_propagator(t);
    let b = free_propagator(t) * harmonic_propagator(2.0 * t) * free_propagator(t);
    (a, b)
}

/// Mode-resolved view of the two-path evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularModeState {
    pub n: usize,
    pub path_a: Matrix2<f64>,
    pub path_b: Matrix2<f64>,
}

impl AngularModeState {
    pub fn new(n: usize, omega_b_tp: f64) -> Self {
        let (path_a, path_b) = path_propagators(omega_b_tp);
        Self { n, path_a, path_b }
    }

    /// `S_b^-1 S_a`, the evolution governing the overlap.
    pub fn relative(&self) -> Matrix2<f64> {
        symplectic_inverse(&self.path_b) * self.path_a
    }

    /// `<psi_n^b | psi_n^a>`, up to an `n`-independent phase.
    pub fn overlap(&self) -> Complex<f64> {
        let (modulus, arg) = mu_polar(&self.relative());
        let z = 1.0 / modulus;
        let p = legendre(self.n, z);
        Complex::from_polar(modulus.powf(-0.5) * p, self.n as f64 * arg)
    }

    /// Width and width rate `(sigma, sigma_dot)` of the ground state after
    /// each path, in units of the initial width and `omega_B`.
    pub fn widths(&self) -> [(f64, f64); 2] {
        [width(&self.path_a), width(&self.path_b)]
    }
}

fn width(s: &Matrix2<f64>) -> (f64, f64) {
    let sigma = (s[(0, 0)].powi(2) + s[(0, 1)].powi(2)).sqrt();
    let rate = (s[(0, 0)] * s[(1, 0)] + s[(0, 1)] * s[(1, 1)]) / sigma;
    (sigma, rate)
}

pub fn symplectic_inverse(s: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(s[(1, 1)], -s[(0, 1)], -s[(1, 0)], s[(0, 0)])
}

fn mu_polar(s: &Matrix2<f64>) -> (f64, f64) {
    let mu = Complex::new(0.5 * (s[(0, 0)] + s[(1, 1)]), 0.5 * (s[(1, 0)] - s[(0, 1)]));
    (mu.norm().max(1.0), mu.arg())
}

fn legendre(n: usize, z: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return p0;
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * z * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Boltzmann ratio `exp(-hbar omega / k_B T)` from `tau = k_B T / hbar omega`.
fn boltzmann_ratio(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else {
        (-1.0 / tau).exp()
    }
}

/// Smallest cutoff whose thermal tail `x^(n+1)` is below the tolerance.
pub fn default_n_max(x: f64) -> usize {
    if x <= 0.0 {
        return 0;
    }
    let n = (TAIL_TOLERANCE.ln() / x.ln()).ceil() - 1.0;
    n.max(0.0) as usize
}

fn cutoff(x: f64, requested: Option<usize>) -> Result<usize> {
    let required = default_n_max(x);
    match requested {
        Some(n) if n < required => Err(Error::Truncation { required, cap: n }),
        Some(n) => Ok(n),
        None if required > N_MAX_CAP => Err(Error::Truncation { required, cap: N_MAX_CAP }),
        None => Ok(required),
    }
}

/// Contrast in reduced units: `omega_b_tp = omega_B T_p` and
/// `tau = k_B T / (hbar omega_B)`.
pub fn contrast_reduced(omega_b_tp: f64, tau: f64, n_max: Option<usize>) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("temperature must be >= 0, got {tau}")));
    }
    let x = boltzmann_ratio(tau);
    let n_max = cutoff(x, n_max)?;
    let (modulus, arg) = mu_polar(&AngularModeState::new(0, omega_b_tp).relative());
    let z = 1.0 / modulus;
    let step = Complex::from_polar(1.0, arg);
    let (mut p0, mut p1) = (1.0, z);
    let mut phase = Complex::new(1.0, 0.0);
    let mut weight = 1.0 - x;
    let mut sum = Complex::new(0.0, 0.0);
    for n in 0..=n_max {
        let p = if n == 0 {
            1.0
        } else if n == 1 {
            z
        } else {
            let k = (n - 1) as f64;
            let p2 = ((2.0 * k + 1.0) * z * p1 - k * p0) / (k + 1.0);
            p0 = p1;
            p1 = p2;
            p2
        };
        sum += phase * (weight * p);
        phase *= step;
        weight *= x;
    }
    // renormalise the truncated thermal state; `weight` is now (1 - x) x^(N+1)
    let kept = 1.0 - weight / (1.0 - x).max(f64::MIN_POSITIVE);
    Ok((sum.norm() * modulus.powf(-0.5) / kept).min(1.0))
}

/// Generating-function closed form of [`contrast_reduced`] (no truncation).
pub fn contrast_closed_form(omega_b_tp: f64, tau: f64) -> f64 {
    let x = boltzmann_ratio(tau);
    let (modulus, arg) = mu_polar(&AngularModeState::new(0, omega_b_tp).relative());
    let z = 1.0 / modulus;
    let t = Complex::from_polar(x, arg);
    let denom = (Complex::new(1.0, 0.0) - t * (2.0 * z) + t * t).norm().sqrt();
    (1.0 - x) * modulus.powf(-0.5) / denom
}

/// Contrast of the thermal libration mode at temperature `t` (K).
pub fn contrast(t: f64, cfg: &InterferometerConfig) -> Result<f64> {
    cfg.validate()?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("temperature must be >= 0, got {t}")));
    }
    contrast_reduced(cfg.omega_b_tp(), t / cfg.phonon_temperature(), cfg.n_max)
}

/// Temperature (K) at which the contrast falls to `target`.
pub fn required_temperature(target: f64, cfg: &InterferometerConfig) -> Result<f64> {
    cfg.validate()?;
    let scale = cfg.phonon_temperature();
    required_tau(target, cfg.omega_b_tp(), cfg.n_max).map(|tau| tau * scale)
}

/// Reduced temperature `k_B T / hbar omega_B` at which the contrast falls
/// to `target`.
pub fn required_tau(target: f64, omega_b_tp: f64, n_max: Option<usize>) -> Result<f64> {
    let c0 = contrast_reduced(omega_b_tp, 0.0, n_max)?;
    if !(target > 0.0 && target < c0) {
        return Err(Error::Unattainable(format!("contrast {target} is not below the zero-temperature contrast {c0}")));
    }
    let f = |tau: f64| contrast_reduced(omega_b_tp, tau, n_max).map(|c| c - target);
    let mut hi = 1.0;
    while f(hi)? > 0.0 {
        hi *= 4.0;
        if hi > 1e9 {
            return Err(Error::Unattainable(format!("contrast {target} not reached below k_B T = 1e9 hbar omega_B")));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Split-step Fourier propagation of the `n`-th eigenstate along both
/// paths; returns the overlap, the path norms and the grid itself.
pub fn grid_overlap(n: usize, omega_b_tp: f64, grid: &GridSettings) -> GridOverlap {
    use rustfft::FftPlanner;

    let m = grid.points;
    let dx = 2.0 * grid.half_width / m as f64;
    let xs: Vec<f64> = (0..m).map(|k| -grid.half_width + k as f64 * dx).collect();
    let ks: Vec<f64> = (0..m)
        .map(|k| {
            let j = if k < m / 2 { k as f64 } else { k as f64 - m as f64 };
            2.0 * PI * j / (m as f64 * dx)
        })
        .collect();
    let psi0 = hermite_function(n, &xs);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let steps = grid.steps_per_pulse.max(1);
    let h = omega_b_tp / steps as f64;

    let evolve = |psi: &mut Vec<Complex<f64>>, duration_pulses: usize, harmonic: bool| {
        let half_v: Vec<Complex<f64>> = xs
            .iter()
            .map(|&x| {
                let v = if harmonic { 0.5 * x * x } else { 0.0 };
                Complex::from_polar(1.0, -0.5 * h * v)
            })
            .collect();
        let kin: Vec<Complex<f64>> = ks.iter().map(|&k| Complex::from_polar(1.0, -0.5 * h * k * k)).collect();
        for _ in 0..duration_pulses * steps {
            psi.iter_mut().zip(&half_v).for_each(|(p, v)| *p *= v);
            fwd.process(psi);
            psi.iter_mut().zip(&kin).for_each(|(p, k)| *p *= k / m as f64);
            inv.process(psi);
            psi.iter_mut().zip(&half_v).for_each(|(p, v)| *p *= v);
        }
    };

    let mut a: Vec<Complex<f64>> = psi0.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut b = a.clone();
    evolve(&mut a, 1, true);
    evolve(&mut a, 2, false);
    evolve(&mut a, 1, true);
    evolve(&mut b, 1, false);
    evolve(&mut b, 2, true);
    evolve(&mut b, 1, false);

    let norm = |p: &[Complex<f64>]| p.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx;
    let overlap = b.iter().zip(&a).map(|(pb, pa)| pb.conj() * pa).sum::<Complex<f64>>() * dx;
    GridOverlap {
        overlap,
        norm_a: norm(&a),
        norm_b: norm(&b),
        initial_norm: norm(&psi0.iter().map(|&v| Complex::new(v, 0.0)).collect::<Vec<_>>()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOverlap {
    pub overlap: Complex<f64>,
    pub norm_a: f64,
    pub norm_b: f64,
    pub initial_norm: f64,
}

/// Normalised Hermite functions by the stable three-term recurrence.
pub fn hermite_function(n: usize, xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let mut h0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
            if n == 0 {
                return h0;
            }
            let mut h1 = 2f64.sqrt() * x * h0;
            for k in 1..n {
                let k = k as f64;
                let h2 = (2.0 / (k + 1.0)).sqrt() * x * h1 - (k / (k + 1.0)).sqrt() * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagators_are_symplectic() {
        for t in [0.01, 0.0375, 0.5, 2.0] {
            let (a, b) = path_propagators(t);
            assert!((a.determinant() - 1.0).abs() < 1e-12);
            assert!((b.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_paths_give_full_contrast() {
        let s = AngularModeState { n: 0, path_a: harmonic_propagator(0.3), path_b: harmonic_propagator(0.3) };
        assert!((s.overlap().norm() - 1.0).abs() < 1e-12);
        for n in [0, 5, 40] {
            let s = AngularModeState { n, ..s };
            assert!((s.overlap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_matches_closed_form() {
        for (t, tau) in [(0.1, 3.0), (0.5, 20.0), (1.0, 0.5), (0.0375, 1e3)] {
            let s = contrast_reduced(t, tau, None).unwrap();
            let c = contrast_closed_form(t, tau);
            assert!((s - c).abs() < 1e-7, "{t} {tau}: {s} vs {c}");
        }
    }

    #[test]
    fn contrast_decreases_with_temperature() {
        let mut last = 1.0;
        for k in 0..20 {
            let c = contrast_reduced(0.5, 0.5 * 1.5f64.powi(k), None).unwrap();
            assert!(c <= last + 1e-12);
            last = c;
        }
    }

    #[test]
    fn required_temperature_round_trip() {
        let tau = required_tau(0.5, 0.6, None).unwrap();
        let c = contrast_reduced(0.6, tau, None).unwrap();
        assert!((c - 0.5).abs() < 1e-4);
        assert!(matches!(required_tau(1.1, 0.6, None), Err(Error::Unattainable(_))));
    }

    #[test]
    fn explicit_cutoff_too_small_is_reported() {
        assert!(matches!(contrast_reduced(0.5, 100.0, Some(10)), Err(Error::Truncation { .. })));
    }

    #[test]
    fn operating_point_numbers() {
        let cfg = InterferometerConfig::default();
        let phase = interferometer_phase(&cfg);
        assert!((phase.with_gravity - 12.0).abs() < 0.5, "{}", phase.with_gravity);
        assert!((phase.splitting - 29.6e-12).abs() < 0.3e-12);
        assert!((cfg.omega_b() / (2.0 * PI) - 1.5e3).abs() < 30.0);
        assert!((cfg.phonon_temperature() - 72e-9).abs() < 2e-9);
        assert!(cfg.warnings().is_empty());
        let strong = InterferometerConfig { b_field: 0.2, ..cfg };
        assert_eq!(strong.warnings().len(), 1);
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let n = 4000;
        let dx = 40.0 / n as f64;
        let xs: Vec<f64> = (0..n).map(|k| -20.0 + k as f64 * dx).collect();
        let h3 = hermite_function(3, &xs);
        let h7 = hermite_function(7, &xs);
        let n3: f64 = h3.iter().map(|v| v * v).sum::<f64>() * dx;
        let c37: f64 = h3.iter().zip(&h7).map(|(a, b)| a * b).sum::<f64>() * dx;
        assert!((n3 - 1.0).abs() < 1e-10);
        assert!(c37.abs() < 1e-10);
    }
}
