//! The field an NV sees in each protocol stage, from rotating the initial
//! magnetization, checked against the expanded trigonometric forms.

use std::f64::consts::TAU;

use nvcorr::field::{expanded, field_stage1, field_stage2, field_stage3};
use nvcorr::{EnsembleAngles, RfDrive, SequenceTiming};

fn main() -> nvcorr::Result<()> {
    let omega = TAU * 1.33e6;
    let timing = SequenceTiming::resonant(omega, 5e-6, 2e-6)?;
    let drive = RfDrive::aligned(TAU * 50e3, omega, 0.7)?;
    let a = EnsembleAngles::new(1.1, 0.4)?;
    let b_max = 1.0;

    let f1 = field_stage1(a, omega, b_max);
    let f2 = field_stage2(a, omega, &drive, &timing, b_max)?;
    let f3 = field_stage3(a, omega, &drive, &timing, b_max)?;

    println!(
        "boundary b1(2tau) = {:+.12}  b2(0) = {:+.12}",
        f1.eval(timing.t1()),
        f2.eval(0.0)
    );
    println!(
        "boundary b2(t_p)  = {:+.12}  b3(0) = {:+.12}",
        f2.eval(timing.t_p),
        f3.eval(0.0)
    );

    println!(
        "{:>10} {:>14} {:>14} {:>10}",
        "t (us)", "b2 rotation", "b2 expanded", "diff"
    );
    for i in 0..6 {
        let t = i as f64 * 1e-6;
        let r = f2.eval(t);
        let e = expanded::b2_resonant(t, a, omega, drive.rabi(), drive.phi_rf, b_max);
        println!("{:>10.1} {:>+14.9} {:>+14.9} {:>10.1e}", t * 1e6, r, e, (r - e).abs());
    }
    Ok(())
}
