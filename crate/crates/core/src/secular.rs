//! Averaged (secular) description of librations in the RF trap.
//!
//! Each Euler-angle mode `i` librates about the body axis `l` it maps to
//! through T at the aligned equilibrium, driven by the quadrupole asymmetry
//! of the cyclic pair `(j, k)` that follows `l`. With `U_DC = 0`:
//!
//! `Omega_i = |T_li| |(Q_j - Q_k)(K_jj - K_kk)| / (sqrt(2) I_l Omega_AC)`
//! and `q_i = 2 U_AC |T_li| |(Q_j - Q_k)(kappa_j - kappa_k)| / (l0^2 I_l Omega_AC^2)`,
//! so that `Omega_i = q_i Omega_AC / (2 sqrt 2)`.
//!
//! The centre-of-mass parameters use `q_axis = 4 q U_AC kappa_axis / (M l0^2 Omega_AC^2)`.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::BOLTZMANN;
use crate::dynamics::{integrate, IntegratorConfig, RigidBodyState};
use crate::error::{Error, Result};
use crate::kinematics::{body_generators, rotation_from_euler, t_inverse, t_matrix, EulerAngles};
use crate::shapes::{ChargeMoments, MassProperties};
use crate::spectral::{find_peak, fit_tone, periodogram};
use crate::trap::{gradient_body_at_voltage, DriveWaveform, Mode, TrapConfig};

/// Libration amplitude taken as the edge of the librational regime (rad).
pub const PHI_MAX: f64 = FRAC_PI_4;

/// Relative spread below which all quadrupole moments count as equal.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: Mode,
    /// Body axis the mode librates about (0-based).
    pub body_axis: usize,
    /// Secular angular frequency (rad/s).
    pub omega: f64,
    /// Rotational Mathieu parameter.
    pub q: f64,
    /// Threshold temperature (K).
    pub threshold_temperature: f64,
    /// `(Q_j - Q_k) / q_charge * M / I_l`.
    pub geometric_factor: f64,
    /// Moment of inertia about the libration axis (kg m^2).
    pub inertia: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComReport {
    /// Mathieu parameters along lab x, y, z (signed with kappa).
    pub q: [f64; 3],
    /// Secular angular frequencies (rad/s).
    pub omega: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecularReport {
    pub equilibrium: EulerAngles,
    pub metastable: bool,
    pub modes: [ModeReport; 3],
    pub com: ComReport,
    pub warnings: Vec<String>,
}

impl SecularReport {
    pub fn mode(&self, m: Mode) -> &ModeReport {
        &self.modes[m.index()]
    }

    pub fn omegas(&self) -> Vector3<f64> {
        Vector3::from_fn(|i, _| self.modes[i].omega)
    }
}

/// Aligned equilibrium returned by [`equilibrium_orientation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// `n3` along the weakest lab axis, `n1`/`n2` ordered by their moments.
    pub angles: EulerAngles,
    /// `n3` does not carry the largest moment, so `angles` differs from `ground`.
    pub metastable: bool,
    /// Alignment with all three moments ranked against the curvatures.
    pub ground: EulerAngles,
}

/// Curvatures seen along the body axes, `diag(R^T diag(kappa) R)`.
pub fn body_curvatures(trap: &TrapConfig, phi: &EulerAngles) -> Vector3<f64> {
    let r = rotation_from_euler(phi);
    let d = r.matrix().transpose() * Matrix3::from_diagonal(&trap.kappa_vector()) * r.matrix();
    d.diagonal()
}

/// Body axis each Euler-angle mode moves at `phi` (largest `|T_li|`).
pub fn mode_axes(phi: &EulerAngles) -> [usize; 3] {
    let t = t_matrix(phi);
    [0, 1, 2].map(|i| (0..3).max_by(|&a, &b| t[(a, i)].abs().total_cmp(&t[(b, i)].abs())).unwrap_or(i))
}

/// Signed products `(Q_j - Q_k)(kappa'_j - kappa'_k)` per body axis `l`.
pub fn signed_stiffness(q_diag: &Vector3<f64>, trap: &TrapConfig, phi: &EulerAngles) -> Vector3<f64> {
    let kb = body_curvatures(trap, phi);
    Vector3::from_fn(|l, _| {
        let (j, k) = ((l + 1) % 3, (l + 2) % 3);
        (q_diag[j] - q_diag[k]) * (kb[j] - kb[k])
    })
}

fn mode_sum<F: Fn(usize) -> f64>(phi: &EulerAngles, per_axis: F) -> Vector3<f64> {
    let t = t_matrix(phi);
    Vector3::from_fn(|i, _| (0..3).map(|l| t[(l, i)].abs() * per_axis(l)).sum())
}

/// Secular libration frequencies per Euler-angle mode (rad/s).
pub fn secular_frequencies(
    q_diag: &Vector3<f64>,
    inertia: &Vector3<f64>,
    trap: &TrapConfig,
    eq: &EulerAngles,
) -> Vector3<f64> {
    let s = signed_stiffness(q_diag, trap, eq);
    let scale = trap.u_ac.abs() / (trap.l0 * trap.l0);
    mode_sum(eq, |l| scale * s[l].abs() / (SQRT_2 * inertia[l] * trap.omega_ac))
}

/// Rotational Mathieu parameters per Euler-angle mode.
pub fn rotational_mathieu(
    q_diag: &Vector3<f64>,
    inertia: &Vector3<f64>,
    trap: &TrapConfig,
    eq: &EulerAngles,
) -> Vector3<f64> {
    let s = signed_stiffness(q_diag, trap, eq);
    let scale = 2.0 * trap.u_ac.abs() / (trap.l0 * trap.l0 * trap.omega_ac * trap.omega_ac);
    mode_sum(eq, |l| scale * s[l].abs() / inertia[l])
}

/// Centre-of-mass Mathieu parameters along lab x, y, z.
pub fn com_mathieu(charge: f64, mass: f64, trap: &TrapConfig) -> [f64; 3] {
    let w2 = trap.omega_ac * trap.omega_ac;
    trap.kappa.map(|k| 4.0 * charge * trap.u_ac * k / (mass * trap.l0 * trap.l0 * w2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MathieuParameters {
    pub rotational: Vector3<f64>,
    pub com: [f64; 3],
    pub geometric_factor: Vector3<f64>,
}

pub fn mathieu_parameters(
    cm: &ChargeMoments,
    props: &MassProperties,
    trap: &TrapConfig,
    eq: &EulerAngles,
) -> MathieuParameters {
    let qd = cm.diagonal();
    let axes = mode_axes(eq);
    let geometric_factor = Vector3::from_fn(|i, _| {
        let l = axes[i];
        let (j, k) = ((l + 1) % 3, (l + 2) % 3);
        if cm.charge == 0.0 {
            0.0
        } else {
            (qd[j] - qd[k]) / cm.charge * props.mass / props.inertia[l]
        }
    });
    MathieuParameters {
        rotational: rotational_mathieu(&qd, &props.inertia, trap, eq),
        com: com_mathieu(cm.charge, props.mass, trap),
        geometric_factor,
    }
}

/// `T_lib = I_l Omega^2 phi_max^2 / k_B` per mode.
pub fn threshold_temperatures(omega: &Vector3<f64>, mode_inertia: &Vector3<f64>) -> Vector3<f64> {
    Vector3::from_fn(|i, _| mode_inertia[i] * omega[i] * omega[i] * PHI_MAX * PHI_MAX / BOLTZMANN)
}

/// Moment of inertia seen by each Euler-angle mode at `eq`.
pub fn mode_inertia(inertia: &Vector3<f64>, eq: &EulerAngles) -> Vector3<f64> {
    let axes = mode_axes(eq);
    Vector3::from_fn(|i, _| inertia[axes[i]])
}

fn tau_from_k(q: &Matrix3<f64>, k: &Matrix3<f64>) -> Vector3<f64> {
    let m = q * k;
    Vector3::new(m[(1, 2)] - m[(2, 1)], m[(2, 0)] - m[(0, 2)], m[(0, 1)] - m[(1, 0)])
}

/// Torque amplitude of the RF component, evaluated at voltage `U_AC`.
pub fn ac_torque(phi: &EulerAngles, cm: &ChargeMoments, trap: &TrapConfig) -> Vector3<f64> {
    tau_from_k(&cm.quadrupole, &gradient_body_at_voltage(trap, phi, trap.u_ac))
}

fn dc_torque(phi: &EulerAngles, cm: &ChargeMoments, trap: &TrapConfig) -> Vector3<f64> {
    tau_from_k(&cm.quadrupole, &gradient_body_at_voltage(trap, phi, trap.u_dc))
}

/// Jacobian of the RF torque amplitude with respect to the Euler angles.
pub fn ac_torque_jacobian(phi: &EulerAngles, cm: &ChargeMoments, trap: &TrapConfig) -> Matrix3<f64> {
    let k = gradient_body_at_voltage(trap, phi, trap.u_ac);
    let gens = body_generators(phi);
    let mut j = Matrix3::zeros();
    for (c, g) in gens.iter().enumerate() {
        let dk = g.transpose() * k + k * g;
        j.set_column(c, &tau_from_k(&cm.quadrupole, &dk));
    }
    j
}

/// Micromotion amplitudes `-(1/Omega^2) T^-1 (tau_AC / I)`.
pub fn micromotion_amplitude(
    phi_s: &EulerAngles,
    cm: &ChargeMoments,
    props: &MassProperties,
    trap: &TrapConfig,
) -> Result<Vector3<f64>> {
    let ti = t_inverse(phi_s)?;
    let tau = ac_torque(phi_s, cm, trap).component_div(&props.inertia);
    Ok(-(ti * tau) / (trap.omega_ac * trap.omega_ac))
}

/// Averaged torque `tau_DC + (1/2) J_AC phi_m`, body frame.
pub fn secular_torque(
    phi_s: &EulerAngles,
    cm: &ChargeMoments,
    props: &MassProperties,
    trap: &TrapConfig,
) -> Result<Vector3<f64>> {
    let phi_m = micromotion_amplitude(phi_s, cm, props, trap)?;
    Ok(dc_torque(phi_s, cm, trap) + 0.5 * ac_torque_jacobian(phi_s, cm, trap) * phi_m)
}

/// Small-angle form `-((Q_j - Q_k)(K_jj - K_kk))^2 theta_l / (2 I_l Omega^2)` with
/// `theta = T delta_phi`, plus the DC term at the equilibrium.
pub fn secular_torque_linear(
    eq: &EulerAngles,
    delta_phi: &Vector3<f64>,
    cm: &ChargeMoments,
    props: &MassProperties,
    trap: &TrapConfig,
) -> Vector3<f64> {
    let theta = t_matrix(eq) * delta_phi;
    let s = signed_stiffness(&cm.diagonal(), trap, eq);
    let c = trap.u_ac / (trap.l0 * trap.l0);
    let w2 = trap.omega_ac * trap.omega_ac;
    dc_torque(eq, cm, trap) + Vector3::from_fn(|l, _| -(c * s[l]).powi(2) * theta[l] / (2.0 * props.inertia[l] * w2))
}

fn euler_from_rotation(m: &Matrix3<f64>) -> EulerAngles {
    let beta = m[(2, 2)].clamp(-1.0, 1.0).acos();
    if beta.sin().abs() < 1e-12 {
        // n3 along lab z: only alpha + gamma is defined
        return EulerAngles::new(m[(1, 0)].atan2(m[(0, 0)]), beta, 0.0);
    }
    EulerAngles::new(m[(1, 2)].atan2(m[(0, 2)]), beta, m[(2, 1)].atan2(-m[(2, 0)]))
}

/// Rotation placing body axis `assign[lab]` along each lab axis; the
/// column of body axis `flip` is negated if needed for `det R = +1`.
fn permutation_rotation(assign: [usize; 3], flip: usize) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for (lab, &body) in assign.iter().enumerate() {
        m[(lab, body)] = 1.0;
    }
    if m.determinant() < 0.0 {
        for lab in 0..3 {
            m[(lab, flip)] *= -1.0;
        }
    }
    m
}

pub fn equilibrium_orientation(q_diag: &Vector3<f64>, trap: &TrapConfig) -> Result<Alignment> {
    let qmax = q_diag.iter().cloned().fold(f64::MIN, f64::max);
    let qmin = q_diag.iter().cloned().fold(f64::MAX, f64::min);
    if qmax - qmin <= DEGENERACY_TOL * qmax.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NoPreferredOrientation);
    }
    // lab axes from weakest to strongest confinement
    let mut labs = [0usize, 1, 2];
    labs.sort_by(|&i, &j| trap.kappa[i].abs().total_cmp(&trap.kappa[j].abs()).then(i.cmp(&j)));
    let (weak, mid, strong) = (labs[0], labs[1], labs[2]);

    let mut assign = [0usize; 3];
    assign[weak] = 2;
    let (hi, lo) = if q_diag[0] > q_diag[1] { (0, 1) } else { (1, 0) };
    assign[mid] = hi;
    assign[strong] = lo;
    let angles = euler_from_rotation(&permutation_rotation(assign, lo));
    let metastable = q_diag[2] < q_diag[hi];

    let mut ranked = [0usize, 1, 2];
    ranked.sort_by(|&i, &j| q_diag[j].total_cmp(&q_diag[i]).then(j.cmp(&i)));
    let mut ground_assign = [0usize; 3];
    for (pos, &lab) in labs.iter().enumerate() {
        ground_assign[lab] = ranked[pos];
    }
    let ground = euler_from_rotation(&permutation_rotation(ground_assign, ranked[2]));
    Ok(Alignment { angles, metastable, ground })
}

/// Full secular analysis at the default aligned equilibrium.
pub fn analyze(cm: &ChargeMoments, props: &MassProperties, trap: &TrapConfig) -> Result<SecularReport> {
    trap.validate()?;
    let qd = cm.diagonal();
    let mut warnings = Vec::new();
    let (equilibrium, metastable) = match equilibrium_orientation(&qd, trap) {
        Ok(a) => (a.angles, a.metastable),
        Err(Error::NoPreferredOrientation) => {
            warnings.push("quadrupole moments are degenerate: no preferred orientation".to_string());
            (EulerAngles::new(0.0, std::f64::consts::FRAC_PI_2, 0.0), false)
        }
        Err(e) => return Err(e),
    };
    analyze_at(cm, props, trap, &equilibrium, metastable, warnings)
}

pub fn analyze_at(
    cm: &ChargeMoments,
    props: &MassProperties,
    trap: &TrapConfig,
    eq: &EulerAngles,
    metastable: bool,
    mut warnings: Vec<String>,
) -> Result<SecularReport> {
    if trap.u_dc != 0.0 {
        warnings.push(format!("U_DC = {} V is nonzero: closed-form secular frequencies assume U_DC = 0", trap.u_dc));
    }
    let qd = cm.diagonal();
    let omega = secular_frequencies(&qd, &props.inertia, trap, eq);
    let mp = mathieu_parameters(cm, props, trap, eq);
    let im = mode_inertia(&props.inertia, eq);
    let tl = threshold_temperatures(&omega, &im);
    let axes = mode_axes(eq);
    let modes = Mode::ALL.map(|m| {
        let i = m.index();
        ModeReport {
            mode: m,
            body_axis: axes[i],
            omega: omega[i],
            q: mp.rotational[i],
            threshold_temperature: tl[i],
            geometric_factor: mp.geometric_factor[i],
            inertia: im[i],
        }
    });
    let com_omega = mp.com.map(|q| q.abs() * trap.omega_ac / (2.0 * SQRT_2));
    Ok(SecularReport { equilibrium: *eq, metastable, modes, com: ComReport { q: mp.com, omega: com_omega }, warnings })
}

/// Generalised (Euler-angle) secular force `T^T tau`.
pub fn generalized_secular_force(
    phi_s: &EulerAngles,
    cm: &ChargeMoments,
    props: &MassProperties,
    trap: &TrapConfig,
) -> Result<Vector3<f64>> {
    Ok(t_matrix(phi_s).transpose() * secular_torque(phi_s, cm, props, trap)?)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Domain(format!("no sign change on [{lo}, {hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rotation of lab coordinates for an alignment, exposed for diagnostics.
pub fn alignment_rotation(a: &EulerAngles) -> Rotation3<f64> {
    rotation_from_euler(a)
}

/// Libration frequency (rad/s) measured from a full RK4 run: the body starts
/// at rest, displaced by `amplitude` in `mode` from `eq`, and the angle is
/// sampled once per RF period. The spectral peak within a factor of two of
/// `expected` (rad/s) seeds a least-squares tone fit.
#[allow(clippy::too_many_arguments)]
pub fn numeric_frequency(
    props: &MassProperties,
    cm: &ChargeMoments,
    trap: &TrapConfig,
    eq: &EulerAngles,
    mode: Mode,
    amplitude: f64,
    duration: f64,
    expected: f64,
) -> Result<f64> {
    let i = mode.index();
    let mut v = eq.as_vector();
    v[i] += amplitude;
    let initial = RigidBodyState::at_rest(EulerAngles::from_vector(&v));
    let w = DriveWaveform::new(*trap);
    let steps = 100;
    let cfg = IntegratorConfig::per_rf_period(&w, steps, duration).with_stride(steps);
    let traj = integrate(&initial, props, cm, &w, &cfg, &[])?;
    let x = traj.angle_series(i);
    let times = traj.times();
    let dt = trap.rf_period();
    let f = expected / (2.0 * PI);
    let hi = (2.0 * f).min(0.45 / dt);
    let peak = find_peak(&periodogram(&x, dt, 8), 0.5 * f, hi)
        .ok_or_else(|| Error::Domain(format!("no spectral peak for the {} mode", mode.name())))?;
    let search = 1.0 / duration;
    let fit = fit_tone(&times, &x, (peak.frequency - search).max(0.25 * f), peak.frequency + search);
    Ok(2.0 * PI * fit.frequency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ELEMENTARY_CHARGE;
    use crate::shapes::{charge_moments, mass_properties, BodyShape, Geometry};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn trap() -> TrapConfig {
        TrapConfig { u_dc: 0.0, u_ac: 100.0, omega_ac: 2.0 * PI * 250e3, l0: 100e-6, kappa: [-0.95, -1.05, 2.0] }
    }

    fn particle(shape: BodyShape) -> (ChargeMoments, MassProperties) {
        let s = shape.with_charge(100.0 * ELEMENTARY_CHARGE);
        (charge_moments(&s).unwrap(), mass_properties(&s).unwrap())
    }

    const EQ: EulerAngles = EulerAngles::new(0.0, FRAC_PI_2, 0.0);

    #[test]
    fn reference_cylinder_values() {
        let (cm, p) = particle(BodyShape::cylindroid(30e-9, 30e-9, 100e-9));
        let r = analyze(&cm, &p, &trap()).unwrap();
        assert_eq!(r.equilibrium.canonical(), EQ);
        assert!(!r.metastable);
        let qb = r.mode(Mode::Beta).q;
        assert!((qb - 0.30).abs() < 0.02, "q_beta = {qb}");
        assert!((r.com.q[2] - 0.52).abs() < 0.03, "q_z = {}", r.com.q[2]);
        let ratio = r.mode(Mode::Beta).omega / r.mode(Mode::Alpha).omega;
        assert!((ratio - 30.0).abs() < 3.0, "{ratio}");
        assert_eq!(r.mode(Mode::Gamma).omega, 0.0);
        // I2 = 1.05e-33 kg m^2, w = 1.66e5 rad/s
        let tb = r.mode(Mode::Beta).threshold_temperature;
        assert!((tb - 1.294).abs() < 0.01, "{tb}");
        let ta = r.mode(Mode::Alpha).threshold_temperature;
        assert!(ta > 1e-3 && ta < 2e-3, "{ta}");
    }

    #[test]
    fn frequency_mathieu_identity() {
        let (cm, p) = particle(BodyShape::cylindroid(25e-9, 37e-9, 90e-9));
        let t = trap();
        let w = secular_frequencies(&cm.diagonal(), &p.inertia, &t, &EQ);
        let q = rotational_mathieu(&cm.diagonal(), &p.inertia, &t, &EQ);
        for i in 0..3 {
            let id = q[i] * t.omega_ac / (2.0 * SQRT_2);
            assert!((w[i] - id).abs() <= 1e-14 * w[i].max(1e-300));
        }
    }

    #[test]
    fn isotropic_trap_plane_kills_alpha() {
        let (cm, p) = particle(BodyShape::cylindroid(25e-9, 37e-9, 90e-9));
        let t = TrapConfig { kappa: [-1.0, -1.0, 2.0], ..trap() };
        let q = rotational_mathieu(&cm.diagonal(), &p.inertia, &t, &EQ);
        assert!(q[0].abs() < 1e-15 && q[1] > 0.0);
    }

    #[test]
    fn micromotion_vanishes_at_equilibrium_and_scales() {
        let (cm, p) = particle(BodyShape::cylindroid(30e-9, 30e-9, 100e-9));
        let t = trap();
        assert!(micromotion_amplitude(&EQ, &cm, &p, &t).unwrap().norm() < 1e-12);
        let off = EulerAngles::new(0.0, FRAC_PI_2 + 0.1, 0.0);
        let m1 = micromotion_amplitude(&off, &cm, &p, &t).unwrap();
        assert!(m1.norm() < 0.1 * 0.2);
        let t2 = TrapConfig { omega_ac: 2.0 * t.omega_ac, ..t };
        let m2 = micromotion_amplitude(&off, &cm, &p, &t2).unwrap();
        assert!((m2.norm() * 4.0 - m1.norm()).abs() < 1e-12 * m1.norm());
    }

    #[test]
    fn secular_torque_small_angle_and_restoring() {
        let (cm, p) = particle(BodyShape::cylindroid(26e-9, 34e-9, 100e-9));
        let t = trap();
        let at_eq = secular_torque(&EQ, &cm, &p, &t).unwrap().norm();
        let d = EulerAngles::new(0.0, FRAC_PI_2 + 1e-2, 0.0);
        assert!(at_eq < 1e-9 * secular_torque(&d, &cm, &p, &t).unwrap().norm());
        for i in 0..2 {
            let mut d = Vector3::zeros();
            d[i] = 1e-2;
            let phi = EulerAngles::from_vector(&(EQ.as_vector() + d));
            let full = secular_torque(&phi, &cm, &p, &t).unwrap();
            let lin = secular_torque_linear(&EQ, &d, &cm, &p, &t);
            let axis = mode_axes(&EQ)[i];
            assert!((full[axis] - lin[axis]).abs() < 0.01 * lin[axis].abs(), "{full} vs {lin}");
            let g = generalized_secular_force(&phi, &cm, &p, &t).unwrap();
            assert!(g.dot(&d) < 0.0);
        }
    }

    #[test]
    fn orientation_and_metastability() {
        let t = trap();
        let (cm, _) = particle(BodyShape::cylindroid(30e-9, 30e-9, 100e-9));
        let a = equilibrium_orientation(&cm.diagonal(), &t).unwrap();
        assert!((a.angles.beta - FRAC_PI_2).abs() < 1e-12 && a.angles.alpha.abs() < 1e-12);
        assert!(matches!(equilibrium_orientation(&Vector3::repeat(1e-32), &t), Err(Error::NoPreferredOrientation)));
        let v = PI * 900e-18 * 100e-9;
        let g = Geometry::cylindroid_fixed_volume(v, 1.25, 0.5);
        let (cm, _) = particle(BodyShape::new(g));
        assert!(equilibrium_orientation(&cm.diagonal(), &t).unwrap().metastable);
    }

    fn fixed_volume_crossing(diff: impl Fn(&Vector3<f64>) -> f64) -> f64 {
        let v = PI * 900e-18 * 100e-9;
        bisect(
            |x| {
                let g = Geometry::cylindroid_fixed_volume(v, 1.25, x);
                let (cm, _) = particle(BodyShape::new(g));
                Ok(diff(&cm.diagonal()))
            },
            0.5,
            1.7,
            1e-6,
        )
        .unwrap()
    }

    #[test]
    fn fixed_volume_transitions() {
        // height moment meets the wide-axis moment: alignment turns metastable
        let wide = fixed_volume_crossing(|q| q[2] - q[1]);
        assert!((0.80..=0.88).contains(&wide), "{wide}");
        // height moment meets the short-axis moment: beta stiffness vanishes
        let short = fixed_volume_crossing(|q| q[2] - q[0]);
        assert!((short - 0.667).abs() < 0.005, "{short}");
        let t = trap();
        let v = PI * 900e-18 * 100e-9;
        let at = |x: f64| {
            let (cm, p) = particle(BodyShape::new(Geometry::cylindroid_fixed_volume(v, 1.25, x)));
            (
                equilibrium_orientation(&cm.diagonal(), &t).unwrap(),
                secular_frequencies(&cm.diagonal(), &p.inertia, &t, &EQ),
            )
        };
        assert!(!at(wide + 0.01).0.metastable && at(wide - 0.01).0.metastable);
        assert!(at(short).1[1] < 1e-6 * at(1.5).1[1]);
        assert!(at(wide).1[0] < 1e-6 * at(1.5).1[0]);
    }

    #[test]
    fn dilation_scales_threshold_by_32() {
        let s = BodyShape::cylindroid(26e-9, 34e-9, 100e-9).with_charge(100.0 * ELEMENTARY_CHARGE);
        let t = trap();
        let tb = |s: &BodyShape| {
            let (cm, p) = (charge_moments(s).unwrap(), mass_properties(s).unwrap());
            analyze(&cm, &p, &t).unwrap().mode(Mode::Beta).threshold_temperature
        };
        let r = tb(&s.dilated_fixed_charge_to_mass(2.0)) / tb(&s);
        assert!((r - 32.0).abs() < 1e-9 * 32.0, "{r}");
    }
}
