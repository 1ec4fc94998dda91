//! The closed-form-free pipeline (Bloch trajectories, sampled fields,
//! propagator readout, grid average) against the closed form. Without the
//! rotating-wave approximation the two part by roughly Omega/omega.

use std::f64::consts::{PI, TAU};

use nvcorr::oracle::{end_to_end_oracle, OracleExperiment, OracleSettings};
use nvcorr::readout::{ensemble_average_closed, EnsembleGrid};
use nvcorr::{PhysicalConstants, ProtocolParams, RfDrive, SequenceTiming};

fn main() -> nvcorr::Result<()> {
    let constants = PhysicalConstants::default();
    let omega = TAU * 1.33e6;
    let b_max = 1e-3 * omega / constants.gamma_e_abs();
    let settings = OracleSettings {
        steps_per_period: 1000,
        grid: EnsembleGrid { n_alpha: 8, n_beta: 8 },
    };
    let t_p = 4e-6;
    for theta in [0.0, PI / 2.0, PI] {
        let drive = RfDrive::aligned(theta / t_p, omega, 0.0)?;
        let timing = SequenceTiming::resonant(omega, t_p, 1.3e-6)?;
        let exp = OracleExperiment {
            omega,
            drive,
            timing,
            b_max,
            constants,
        };
        let o = end_to_end_oracle(&exp, settings)?;
        let c = ensemble_average_closed(&ProtocolParams::from_drive(omega, &drive, timing, b_max, &constants)?)?;
        println!(
            "theta {theta:.4}: oracle {:+.5} K, closed form {:+.5} K, warnings {:?}",
            o.signal.value / c.prefactor,
            c.value / c.prefactor,
            o.warnings
        );
    }
    Ok(())
}
