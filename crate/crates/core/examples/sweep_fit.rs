//! Run a configured sweep, fit each trace at the Larmor frequency and
//! print amplitude ratios against the undriven trace.
//!
//! cargo run --example sweep_fit -- crates/core/examples/configs/fig2.toml

use std::path::PathBuf;

use nvcorr::experiment::{run_sweep, ExperimentConfig};

fn main() -> nvcorr::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/fig2.toml")));
    let config = ExperimentConfig::load(&path)?;
    let result = run_sweep(&config, 2, 0)?;
    println!(
        "{:>6} {:>8} {:>10} {:>10} {:>10}",
        "trace", "phi_rf", "theta", "in-phase", "quadr."
    );
    for s in &result.summaries {
        let (i, q) = s.ratio.map_or((f64::NAN, f64::NAN), |r| (r.in_phase, r.quadrature));
        println!(
            "{:>6} {:>8.4} {:>10.4} {:>+10.5} {:>10.5}",
            s.index, s.meta.phi_rf, s.meta.rotation_angle, i, q
        );
    }
    Ok(())
}
