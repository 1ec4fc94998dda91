//! NV phases φ₁…φ₄ by quadrature and by closed form, plus an XY8-4 block
//! compared with the two-segment echo.

use std::f64::consts::TAU;

use nvcorr::field::field_stage1;
use nvcorr::phases::{
    phase_quadrature, phases_quadrature, phases_resonant, phi2_resonant_transcribed, TogglingPattern,
    DEFAULT_PHASE_ORDER,
};
use nvcorr::{EnsembleAngles, Magnetization, PhysicalConstants, ProtocolParams, RfDrive, SequenceTiming};

fn main() -> nvcorr::Result<()> {
    let c = PhysicalConstants::default();
    let omega = TAU * 1.33e6;
    let timing = SequenceTiming::resonant(omega, 30e-6, 61e-6)?;
    let drive = RfDrive::aligned(TAU * 16.7e3, omega, 0.3)?;
    let b_max = 1e-3 * omega / c.gamma_e_abs();
    let p = ProtocolParams::from_drive(omega, &drive, timing, b_max, &c)?;
    let a = EnsembleAngles::new(1.2, 2.5)?;

    let q = phases_quadrature(&p, &Magnetization::from_angles(a), DEFAULT_PHASE_ORDER)?;
    let r = phases_resonant(&p, a)?;
    let s = p.phase_scale();
    println!("units of B_max|gamma_e|/omega = {s:.3e}");
    for (i, (x, y)) in q.phases.to_array().iter().zip(r.to_array()).enumerate() {
        println!("phi{}  quadrature {:+.10}  closed form {:+.10}", i + 1, x / s, y / s);
    }
    let t = phi2_resonant_transcribed(&p, a)?;
    println!("phi2 as transcribed (no |gamma_e| on sin terms): {:+.3e}", t / s);

    // Echo versus XY8-4 over the first block, same total length.
    let f = field_stage1(a, omega, b_max);
    let echo = phase_quadrature(&f, &TogglingPattern::echo(0.0, timing.tau)?, c.gamma_e_abs(), 16)?;
    let xy8 = phase_quadrature(&f, &TogglingPattern::xy8(0.0, timing.tau, 4)?, c.gamma_e_abs(), 16)?;
    println!(
        "echo phase {:+.6}, XY8-4 phase {:+.6} (scaled)",
        echo.value / s,
        xy8.value / s
    );
    Ok(())
}
