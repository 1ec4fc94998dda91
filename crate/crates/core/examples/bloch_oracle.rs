//! Lab-frame Bloch integration against the rotating-wave closed form, and
//! the direction in which a ŷ drive component turns the nutation axis.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use nalgebra::Vector3;
use nvcorr::oracle::bloch::{integrate_bloch, rwa_deviation, BlochProblem};
use nvcorr::RfDrive;

fn main() -> nvcorr::Result<()> {
    let omega = TAU * 1.33e6;
    println!("{:>8} {:>12} {:>12}", "Omega/w", "deviation", "dev/ratio");
    for r in [0.04, 0.02, 0.01, 0.005] {
        let d = rwa_deviation(omega, &RfDrive::aligned(r * omega, omega, 0.0)?, Vector3::z(), None)?;
        println!("{r:>8} {d:>12.4e} {:>12.4}", d / r);
    }

    let drive = RfDrive::aligned(0.01 * omega, omega, 0.0)?;
    let traj = integrate_bloch(&BlochProblem::free(Vector3::z(), omega, PI / drive.rabi()).with_drive(&drive))?;
    println!(
        "pi pulse: final M_z {:+.5}, norm drift {:.1e}",
        traj.last().z,
        traj.norm_drift()
    );

    let c = 0.01 * omega / 2f64.sqrt();
    let tilted = RfDrive::misaligned(c, c, omega, 0.0)?;
    for (label, axis) in [("phi + pi/4", FRAC_PI_4), ("phi - pi/4", -FRAC_PI_4)] {
        let d = rwa_deviation(omega, &tilted, Vector3::z(), Some(axis))?;
        println!("equal x/y drive vs axis at {label}: deviation {d:.3e}");
    }
    Ok(())
}
