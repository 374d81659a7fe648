use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use librotrap::constants::{BOLTZMANN, HBAR};
use librotrap::cooling::{run_cooling, CoolingOptions};
use librotrap::dynamics::{integrate_with, Thermalization};
use librotrap::interferometry::{contrast_reduced, interferometer_phase, mean_phonons, required_tau};
use librotrap::secular::{analyze, com_mathieu, numeric_frequency};
use librotrap::thermo::{damping_tensor_surface, steady_state_modes, steady_state_temperature};
use librotrap::{DriveWaveform, Error, Geometry, IntegratorConfig, Mode, Particle, SecularReport};

use crate::config::{RunConfig, SweepParameter, SweepSection};
use crate::output::{num, OutputDir, Table};

/// Numeric validation runs: 5 ms, 0.1 rad single-mode kick.
const VALIDATION_DURATION: f64 = 5e-3;
const VALIDATION_AMPLITUDE: f64 = 0.1;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Model(Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(e) => match e {
                Error::InvalidShape(_)
                | Error::InvalidTrap(_)
                | Error::InvalidParameter(_)
                | Error::Domain(_)
                | Error::NoPreferredOrientation => 2,
                Error::Unattainable(_) => 4,
                Error::GimbalSingularity { .. }
                | Error::Instability { .. }
                | Error::Quadrature { .. }
                | Error::NoSteadyState(_)
                | Error::Truncation { .. } => 3,
            },
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

pub struct Options {
    pub validate: bool,
}

type CmdResult = Result<(), CliError>;

/// The configured sweep, else `default` for cylindroids. Other shapes
/// without a sweep are evaluated once, reported with `sweep_param = 0`.
fn sweep_or(cfg: &RunConfig, default: SweepSection) -> Option<SweepSection> {
    let cylindroid = matches!(cfg.particle.shape.geometry(), Geometry::Cylindroid { .. });
    cfg.sweep.or(cylindroid.then_some(default))
}

fn sweep_geometry(cfg: &RunConfig, parameter: SweepParameter, x: f64) -> Result<Geometry, CliError> {
    let Geometry::Cylindroid { a, b, length } = cfg.particle.shape.geometry() else {
        return Err(CliError::Config("shape sweeps need a cylindroid particle".into()));
    };
    Ok(match parameter {
        SweepParameter::BOverA => Geometry::cylindroid_with_ratio((a * b).sqrt(), x, length),
        SweepParameter::LOver2b => Geometry::cylindroid_fixed_volume(PI * a * b * length, b / a, x),
    })
}

fn header_name(p: Option<SweepParameter>) -> &'static str {
    match p {
        Some(SweepParameter::BOverA) => "b_over_a",
        Some(SweepParameter::LOver2b) => "l_over_2b",
        None => "none",
    }
}

struct SweepPoint {
    x: f64,
    particle: Particle,
    /// `None` when the quadrupole moments are degenerate.
    report: Option<SecularReport>,
}

fn secular_sweep(cfg: &RunConfig, sweep: Option<&SweepSection>) -> Result<Vec<SweepPoint>, CliError> {
    let trap = cfg.trap.trap();
    trap.validate()?;
    let values = sweep.map_or(vec![0.0], |s| s.values());
    values
        .into_par_iter()
        .map(|x| {
            let geometry = match sweep {
                Some(s) => sweep_geometry(cfg, s.parameter, x)?,
                None => cfg.particle.shape.geometry(),
            };
            let particle = Particle::new(cfg.particle.body_with(geometry))?;
            let report = match analyze(&particle.moments, &particle.props, &trap) {
                // degenerate moments come back as an all-zero report
                Ok(r) if r.modes.iter().all(|m| m.omega == 0.0) => None,
                Ok(r) => Some(r),
                Err(Error::NoPreferredOrientation) => None,
                Err(e) => return Err(e.into()),
            };
            Ok(SweepPoint { x, particle, report })
        })
        .collect()
}

const DEFAULT_SHAPE_SWEEP: SweepSection =
    SweepSection { parameter: SweepParameter::BOverA, start: 1.0, stop: 2.0, points: 21 };

pub fn modes(cfg: &RunConfig, opts: &Options, out: &mut OutputDir) -> CmdResult {
    let sweep = sweep_or(cfg, DEFAULT_SHAPE_SWEEP);
    let points = secular_sweep(cfg, sweep.as_ref())?;
    let trap = cfg.trap.trap();
    let mut table = Table::new(&[
        "sweep_param",
        "omega_alpha",
        "omega_beta",
        "omega_gamma",
        "q_alpha",
        "q_beta",
        "q_gamma",
        "T_alpha",
        "T_beta",
        "T_gamma",
        "qz_com",
    ]);
    let mut reports = Vec::new();
    for p in &points {
        let qz = com_mathieu(p.particle.moments.charge, p.particle.props.mass, &trap)[2];
        let mut row = vec![p.x];
        match &p.report {
            Some(r) => {
                row.extend(r.modes.iter().map(|m| m.omega));
                row.extend(r.modes.iter().map(|m| m.q));
                row.extend(r.modes.iter().map(|m| m.threshold_temperature));
            }
            None => row.extend([0.0; 9]),
        }
        row.push(qz);
        table.push_numbers(&row);
        reports.push(json!({
            "sweep_param": p.x,
            "report": p.report,
            "metastable": p.report.as_ref().is_some_and(|r| r.metastable),
            "degenerate": p.report.is_none(),
        }));
    }
    out.write_table(
        "modes",
        &table,
        &json!({ "parameter": header_name(sweep.map(|s| s.parameter)), "points": reports }),
    )?;

    if opts.validate {
        validate_modes(&points, &trap, out)?;
    }
    Ok(())
}

fn validate_modes(points: &[SweepPoint], trap: &librotrap::TrapConfig, out: &mut OutputDir) -> CmdResult {
    // modes slower than one cycle per run cannot be resolved
    let resolvable = 2.0 * PI / VALIDATION_DURATION;
    let jobs: Vec<(usize, Mode)> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.report.is_some())
        .flat_map(|(k, _)| Mode::ALL.map(|m| (k, m)))
        .collect();
    let rows: Vec<Vec<String>> = jobs
        .into_par_iter()
        .map(|(k, mode)| {
            let p = &points[k];
            let r = p.report.as_ref().expect("filtered");
            let w = r.mode(mode).omega;
            let (numeric, status) = if w < resolvable {
                (String::new(), "unresolved")
            } else {
                match numeric_frequency(
                    &p.particle.props,
                    &p.particle.moments,
                    trap,
                    &r.equilibrium,
                    mode,
                    VALIDATION_AMPLITUDE,
                    VALIDATION_DURATION,
                    w,
                ) {
                    Ok(f) => (num(f), "ok"),
                    Err(Error::Instability { .. }) => (String::new(), "unstable"),
                    Err(_) => (String::new(), "failed"),
                }
            };
            let rel = numeric.parse::<f64>().map(|f| num((f - w).abs() / w)).unwrap_or_default();
            vec![num(p.x), mode.name().to_string(), num(w), numeric, rel, status.to_string()]
        })
        .collect();
    let mut table = Table::new(&["sweep_param", "mode", "omega_analytic", "omega_numeric", "rel_error", "status"]);
    for row in rows {
        table.push(row);
    }
    let summary = json!({
        "duration_s": VALIDATION_DURATION,
        "amplitude_rad": VALIDATION_AMPLITUDE,
        "rows": table.len(),
    });
    out.write_table("modes_validation", &table, &summary)?;
    Ok(())
}

pub fn thresholds(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let sweep = sweep_or(cfg, DEFAULT_SHAPE_SWEEP);
    let points = secular_sweep(cfg, sweep.as_ref())?;
    let mut table = Table::new(&["sweep_param", "T_alpha", "T_beta", "T_gamma", "metastable"]);
    for p in &points {
        let (t, meta) = match &p.report {
            Some(r) => (r.modes.map(|m| m.threshold_temperature), r.metastable),
            None => ([0.0; 3], false),
        };
        table.push(vec![num(p.x), num(t[0]), num(t[1]), num(t[2]), u8::from(meta).to_string()]);
    }
    out.write_table("thresholds", &table, &json!({ "parameter": header_name(sweep.map(|s| s.parameter)) }))?;
    Ok(())
}

fn particle_and_report(cfg: &RunConfig) -> Result<(Particle, SecularReport), CliError> {
    let particle = Particle::new(cfg.particle.body())?;
    let report = analyze(&particle.moments, &particle.props, &cfg.trap.trap())?;
    Ok((particle, report))
}

pub fn simulate(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let (particle, report) = particle_and_report(cfg)?;
    let trap = cfg.trap.trap();
    let w = DriveWaveform::new(trap);
    let icfg =
        IntegratorConfig::per_rf_period(&w, cfg.sim.dt_per_period, cfg.sim.t_end.si).with_stride(cfg.sim.record_stride);
    let initial = cfg.sim.initial_state(&report.equilibrium);
    let thermal = if cfg.sim.thermal {
        let gas = cfg.gas.model(cfg.gas.alpha_c);
        let rates = damping_tensor_surface(&particle.shape, &particle.props, &gas)?;
        Some(Thermalization { rates: rates.gamma, temperature: gas.temperature, seed: cfg.sim.seed })
    } else {
        None
    };
    let traj = integrate_with(&initial, &particle.props, &particle.moments, &w, &icfg, &[], thermal)?;
    let eq = report.equilibrium.as_vector();
    let omegas = report.omegas();
    let inertia = report.modes.map(|m| m.inertia);
    let mut table = Table::new(&[
        "t",
        "alpha",
        "beta",
        "gamma",
        "omega1",
        "omega2",
        "omega3",
        "x",
        "y",
        "z",
        "vx",
        "vy",
        "vz",
        "energy_alpha",
        "energy_beta",
        "energy_gamma",
    ]);
    for s in &traj.samples {
        let rates = s.angle_rates()?;
        let d = s.angles.as_vector() - eq;
        let mut row = vec![s.t, s.angles.alpha, s.angles.beta, s.angles.gamma];
        row.extend(s.omega.iter());
        row.extend(s.position.iter());
        row.extend(s.velocity.iter());
        row.extend((0..3).map(|i| 0.5 * inertia[i] * (rates[i] * rates[i] + omegas[i] * omegas[i] * d[i] * d[i])));
        table.push_numbers(&row);
    }
    let summary = json!({
        "equilibrium": report.equilibrium,
        "omegas": omegas.as_slice(),
        "dt": icfg.dt,
        "samples": table.len(),
        "thermal": thermal,
        "warnings": report.warnings,
    });
    out.write_table("trajectory", &table, &summary)?;
    Ok(())
}

pub fn cool(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let (particle, report) = particle_and_report(cfg)?;
    let fb = cfg.feedback.feedback();
    let initial = cfg.sim.initial_state(&report.equilibrium);
    let opts = CoolingOptions { steps_per_rf_period: cfg.sim.dt_per_period, ..CoolingOptions::default() };
    let run =
        run_cooling(&initial, &particle.props, &particle.moments, &cfg.trap.trap(), &fb, cfg.sim.t_end.si, &opts)?;
    let tr = &run.trace;
    let mut header = vec!["t", "E_alpha", "E_beta", "E_gamma"];
    header.extend(["f_est_alpha", "phi_est_alpha", "f_est_beta", "phi_est_beta", "f_est_gamma", "phi_est_gamma"]);
    let mut table = Table::new(&header);
    // latest valid estimate per mode, held until the next window
    let mut latest: [Option<(f64, f64)>; 3] = [None; 3];
    let mut next = 0;
    for (k, &t) in tr.times.iter().enumerate() {
        while next < tr.estimates.len() && tr.estimates[next].t <= t {
            let e = &tr.estimates[next].estimate;
            if e.valid {
                latest[e.mode.index()] = Some((e.frequency, e.phase));
            }
            next += 1;
        }
        let mut row: Vec<String> = vec![num(t)];
        row.extend((0..3).map(|i| num(tr.energies[i][k])));
        for est in latest {
            match est {
                Some((f, p)) => row.extend([num(f), num(p)]),
                None => row.extend([String::new(), String::new()]),
            }
        }
        table.push(row);
    }
    let quantum_crossings: Vec<Option<f64>> =
        Mode::ALL.iter().map(|&m| tr.crossing_time(m, HBAR * tr.omegas[m.index()])).collect();
    let summary = json!({
        "modes": fb.modes,
        "omegas": tr.omegas,
        "cooling_start": tr.cooling_start,
        "fitted_rates": tr.fitted_rates,
        "predicted_rates": tr.predicted_rates,
        "hbar_omega_crossing": quantum_crossings,
        "window_estimates": tr.estimates.len(),
        "warnings": tr.warnings,
    });
    out.write_table("cooling", &table, &summary)?;
    Ok(())
}

pub fn steadystate(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let sweep = sweep_or(cfg, SweepSection { parameter: SweepParameter::BOverA, start: 1.05, stop: 2.0, points: 20 });
    let points = secular_sweep(cfg, sweep.as_ref())?;
    let delta = cfg.feedback.delta;
    let t_gas = cfg.gas.temperature.si;
    let mut table =
        Table::new(&[header_name(sweep.map(|s| s.parameter)), "Tss_alpha", "Tss_beta", "Tss_gamma", "model"]);
    let mut warnings = Vec::new();
    for (model, alpha_c) in [("specular", 0.0), ("diffuse", 1.0)] {
        let gas = cfg.gas.model(alpha_c);
        gas.validate()?;
        for p in &points {
            let Some(r) = &p.report else {
                warnings.push(format!(
                    "{} = {}: degenerate shape, no libration modes",
                    header_name(sweep.map(|s| s.parameter)),
                    p.x
                ));
                continue;
            };
            let rates = damping_tensor_surface(&p.particle.shape, &p.particle.props, &gas)?.per_mode(&r.equilibrium);
            let damp = r.omegas() * delta;
            let mut row = vec![num(p.x)];
            match steady_state_modes(&rates, &damp, t_gas) {
                Ok(t) => row.extend(t.iter().map(|&v| num(v))),
                Err(_) => {
                    // mode by mode, so one undamped mode does not hide the others
                    for i in 0..3 {
                        match steady_state_temperature(rates[i], damp[i], t_gas) {
                            Ok(t) => row.push(num(t)),
                            Err(_) => {
                                row.push(String::new());
                                warnings.push(format!(
                                    "{model}, {} = {}: {} mode has no steady state",
                                    header_name(sweep.map(|s| s.parameter)),
                                    p.x,
                                    Mode::ALL[i].name()
                                ));
                            }
                        }
                    }
                }
            }
            row.push(model.to_string());
            table.push(row);
        }
    }
    let summary = json!({ "delta": delta, "gas_temperature": t_gas, "warnings": warnings });
    out.write_table("steadystate", &table, &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct Requirement {
    #[serde(rename = "omegaB_Tp")]
    omega_b_tp: f64,
    target: f64,
    temperature_over_hbar_omegab_kb: f64,
    temperature_k: f64,
}

pub fn contrast(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let icfg = cfg.interferometer.config();
    icfg.validate()?;
    let c = &cfg.contrast;
    let temps = c.temperatures();
    let grid: Vec<(f64, f64)> = c.omega_b_tp.iter().flat_map(|&th| temps.iter().map(move |&t| (th, t))).collect();
    let rows = grid
        .into_par_iter()
        .map(|(theta, t)| {
            let omega_b = theta / icfg.t_p;
            let tau = BOLTZMANN * t / (HBAR * omega_b);
            let contrast = contrast_reduced(theta, tau, icfg.n_max)?;
            Ok(vec![theta, contrast, tau, t, mean_phonons(omega_b, t)])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut table =
        Table::new(&["omegaB_Tp", "contrast", "temperature_over_hbar_omegaB_kB", "temperature_K", "mean_phonons"]);
    for r in &rows {
        table.push_numbers(r);
    }
    let mut requirements = Vec::new();
    let mut unattainable = None;
    if let Some(target) = c.target {
        for &theta in &c.omega_b_tp {
            match required_tau(target, theta, icfg.n_max) {
                Ok(tau) => requirements.push(Requirement {
                    omega_b_tp: theta,
                    target,
                    temperature_over_hbar_omegab_kb: tau,
                    temperature_k: tau * HBAR * theta / (icfg.t_p * BOLTZMANN),
                }),
                Err(e @ Error::Unattainable(_)) => {
                    unattainable.get_or_insert(e);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    let summary = json!({
        "t_p": icfg.t_p,
        "n_max": icfg.n_max,
        "required": requirements,
        "warnings": icfg.warnings(),
    });
    out.write_table("contrast", &table, &summary)?;
    match unattainable {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

pub fn phase(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let icfg = cfg.interferometer.config();
    icfg.validate()?;
    let ph = interferometer_phase(&icfg);
    let omega_b = icfg.omega_b();
    let mut table = Table::new(&["quantity", "value", "unit"]);
    let rows: [(&str, f64, &str); 7] = [
        ("phi_int", ph.with_gravity, "rad"),
        ("phi_int_without_gravity", ph.without_gravity, "rad"),
        ("splitting", ph.splitting, "m"),
        ("omega_B", omega_b, "rad/s"),
        ("f_B", omega_b / (2.0 * PI), "Hz"),
        ("hbar_omegaB_over_kB", icfg.phonon_temperature(), "K"),
        ("omegaB_Tp", icfg.omega_b_tp(), "1"),
    ];
    for (name, value, unit) in rows {
        table.push(vec![name.to_string(), num(value), unit.to_string()]);
    }
    out.write_table("phase", &table, &json!({ "warnings": icfg.warnings() }))?;
    Ok(())
}
