//! Librational dynamics of charged, reflection-symmetric nanoparticles in a
//! quadrupole Paul trap.
//!
//! The crate covers particle geometry and charge moments, rigid-body
//! integration under the RF drive, the averaged secular layer, parametric
//! feedback cooling of libration modes, gas-collision damping and heating,
//! and the two-path Stern-Gerlach contrast model.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod cooling;
pub mod dynamics;
pub mod error;
pub mod interferometry;
pub mod kinematics;
pub mod quadrature;
pub mod secular;
pub mod shapes;
pub mod spectral;
pub mod thermo;
pub mod trap;

pub use cooling::{CoolingTrace, FeedbackConfig, ModeEstimate};
pub use dynamics::{IntegratorConfig, RigidBodyState, Trajectory};
pub use error::{Error, Result};
pub use interferometry::InterferometerConfig;
pub use kinematics::EulerAngles;
pub use secular::SecularReport;
pub use shapes::{BodyShape, ChargeMoments, Geometry, MassProperties};
pub use thermo::{DampingRates, GasModel};
pub use trap::{DriveWaveform, Mode, ModulationChannel, TrapConfig};

/// Mass properties and charge moments of one particle, computed once.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Particle {
    pub shape: BodyShape,
    pub props: MassProperties,
    pub moments: ChargeMoments,
}

impl Particle {
    pub fn new(shape: BodyShape) -> Result<Self> {
        Ok(Self { shape, props: shapes::mass_properties(&shape)?, moments: shapes::charge_moments(&shape)? })
    }
}
