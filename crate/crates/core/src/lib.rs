//! Simulation of NV-centre correlation spectroscopy on RF-driven nuclear
//! spin noise.
//!
//! The pipeline runs magnetization rotations ([`rotations`]) → stage
//! fields ([`field`]) → accumulated NV phases ([`phases`]) → single-NV
//! readout and orientation average ([`readout`]). Each step has a
//! numerical counterpart in [`oracle`], and [`experiment`] turns
//! configuration files into traces, fits and reports.
//!
//! All quantities are SI with angular frequencies in rad/s.

pub mod error;
pub mod experiment;
pub mod field;
pub mod model;
pub mod oracle;
pub mod phases;
pub mod protocol;
pub mod quadrature;
pub mod readout;
pub mod rotations;
pub mod units;

pub use error::{Error, Result};
pub use model::{EnsembleAngles, Magnetization, NvSample, PhysicalConstants, RfDrive, SequenceTiming};
pub use phases::PhaseSet;
pub use protocol::ProtocolParams;
pub use readout::EnsembleSignal;
