//! Configuration, sweeps, fitting, output files and the reconciliation
//! suite.

pub mod config;
pub mod fit;
pub mod output;
pub mod reconcile;
pub mod sweep;

pub use config::{parse_config, ConfigError, Engine, ExperimentConfig};
pub use fit::{amplitude_ratio, fit_sinusoid, AmplitudeRatio, SinusoidFit};
pub use output::{read_trace_csv, write_outputs, CsvTrace};
pub use reconcile::{run_validation, ReconciliationReport, ValidationSettings};
pub use sweep::{run_sweep, SweepResult, Trace};
