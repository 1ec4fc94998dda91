//! Orientation-averaged signal: closed form, grid quadrature and seeded
//! Monte Carlo, and the three special RF phases. Monte Carlo samples the
//! first-order terms too, so its standard error is large next to K.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use nvcorr::readout::{
    ensemble_average_closed, ensemble_average_monte_carlo, ensemble_average_quadrature, special_case,
    EnsembleResolution,
};
use nvcorr::{PhysicalConstants, ProtocolParams, RfDrive, SequenceTiming};

fn main() -> nvcorr::Result<()> {
    let c = PhysicalConstants::default();
    let omega = TAU * 1.33e6;
    let timing = SequenceTiming::resonant(omega, 30e-6, 61e-6)?;
    let b_max = 1e-3 * omega / c.gamma_e_abs();
    let drive = RfDrive::aligned(TAU * 5e3, omega, 0.4)?;
    let p = ProtocolParams::from_drive(omega, &drive, timing, b_max, &c)?;

    let closed = ensemble_average_closed(&p)?;
    let quad = ensemble_average_quadrature(&p, EnsembleResolution::default())?;
    let mc = ensemble_average_monte_carlo(&p, 20_000, 1, 16)?;
    let k = closed.prefactor;
    println!("K = {k:.4e}");
    println!("closed form  {:+.9}", closed.value / k);
    println!("quadrature   {:+.9}  (error {:.1e})", quad.value / k, quad.error / k);
    println!("Monte Carlo  {:+.4} +- {:.4}", mc.value / k, mc.error / k);

    println!("\nspecial phases: general form vs displayed formula (units of K)");
    for phi in [0.0, FRAC_PI_4, FRAC_PI_2] {
        let s = special_case(phi, &p)?;
        println!(
            "{:?}: general {:+.6}  displayed {:+.6}",
            s.phase,
            s.general.value / k,
            s.displayed / k
        );
    }
    Ok(())
}
