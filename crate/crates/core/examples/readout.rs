//! Single-NV readout: exact, small-angle, and from the product of 2×2
//! propagators.

use nvcorr::oracle::propagator::readout_from_propagator;
use nvcorr::readout::{fitted_remainder_coefficient, sigma_z_exact, sigma_z_small_angle};
use nvcorr::PhaseSet;

fn main() {
    for scale in [0.3, 0.1, 0.03, 0.01] {
        let p = PhaseSet::new(0.7 * scale, -0.4 * scale, 0.9 * scale, -scale);
        let e = sigma_z_exact(&p).value;
        println!(
            "max|phi| {scale:<5} exact {:+.3e}  propagator {:+.3e}  small-angle {:+.3e}",
            e,
            readout_from_propagator(&p).value,
            sigma_z_small_angle(&p).value
        );
    }
    let f = fitted_remainder_coefficient(10_000, 0.1, 3);
    println!(
        "remainder ~ C max|phi|^3: fitted C = {:.3}, worst pointwise {:.3}",
        f.fitted, f.worst
    );
}
