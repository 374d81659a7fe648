use thiserror::Error;

/// Errors produced by the librotrap models and simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid trap configuration: {0}")]
    InvalidTrap(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("gimbal singularity: |sin(beta)| = {sin_beta:e} is below the tolerance {tolerance:e}")]
    GimbalSingularity { sin_beta: f64, tolerance: f64 },

    #[error("numerical instability detected at t = {time:e} s: {reason}")]
    Instability { time: f64, reason: String },

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("no preferred orientation: quadrupole moments are degenerate")]
    NoPreferredOrientation,

    #[error("no steady state: damping rate {0:e} 1/s is not positive")]
    NoSteadyState(f64),

    #[error("thermal truncation requires n_max = {required} but the cap is {cap}; increase n_max")]
    Truncation { required: usize, cap: usize },

    #[error("target is unattainable: {0}")]
    Unattainable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
