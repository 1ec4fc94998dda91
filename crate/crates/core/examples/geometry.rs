//! Hemisphere coupling integrals. The transverse terms vanish by symmetry;
//! the longitudinal one converges with quadrature order. The hemisphere
//! radius equals the depth, so the integrals are depth independent.

use nvcorr::field::hemisphere_integral;

fn main() -> nvcorr::Result<()> {
    println!(
        "{:>6} {:>12} {:>12} {:>16} {:>10} {:>5}",
        "order", "I_x", "I_y", "I_f", "error", "conv"
    );
    for order in [4, 8, 12, 16, 24] {
        let g = hemisphere_integral(5e-9, order)?;
        println!(
            "{order:>6} {:>12.3e} {:>12.3e} {:>16.12} {:>10.1e} {:>5}",
            g.i_x, g.i_y, g.i_f, g.error, g.converged
        );
    }
    Ok(())
}
