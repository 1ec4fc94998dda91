//! Brute-force cross-checks that share no closed forms with the main
//! pipeline: a lab-frame Bloch integrator, the 2×2 propagator product, and
//! the end-to-end numerical signal built from them.

pub mod bloch;
pub mod end_to_end;
pub mod propagator;

pub use bloch::{integrate_bloch, rwa_deviation, BlochProblem, Trajectory};
pub use end_to_end::{end_to_end_oracle, OracleExperiment, OracleSettings, OracleSignal};
pub use propagator::{readout_from_propagator, QubitPropagator};
