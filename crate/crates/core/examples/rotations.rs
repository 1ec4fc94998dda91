//! Rotation building blocks: free precession, resonant nutation, and the
//! effective axis of a drive with an unwanted ŷ component.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nvcorr::rotations::{effective_axis, propagate_driven, propagate_free, rotation_k, rotation_z};
use nvcorr::{Magnetization, RfDrive};

fn main() -> nvcorr::Result<()> {
    let omega = TAU * 1.33e6;
    let m = Magnetization::unit_x();

    let quarter = propagate_free(&m, omega, FRAC_PI_2 / omega)?;
    println!("x after a quarter Larmor turn: {:?}", quarter.vector().as_slice());

    let r = rotation_z(0.4)? * rotation_k(0.3, 1.1)?;
    println!(
        "R_z R_k: det {:.15}, orthogonality defect {:.1e}",
        r.determinant(),
        r.orthogonality_defect()
    );

    // A π pulse about x̂ inverts ẑ (in the rotating frame, read at t = π/Ω).
    let rabi = 0.01 * omega;
    let drive = RfDrive::aligned(rabi, omega, 0.0)?;
    let flipped = propagate_driven(&Magnetization::unit_z(), omega, &drive, PI / rabi)?;
    println!("z after a pi pulse: {:+.6}", flipped.z());

    for ratio in [0.0, 0.5, 1.0, 2.0] {
        let d = RfDrive::misaligned(rabi, ratio * rabi, omega, 0.2)?;
        let axis = effective_axis(&d)?;
        println!(
            "Omega_y/Omega_x = {ratio:<3}: Omega = {:.4e} rad/s, axis phase {:+.4} rad",
            d.rabi(),
            axis.phase
        );
    }
    Ok(())
}
