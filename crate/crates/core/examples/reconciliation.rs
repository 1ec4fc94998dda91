//! The reconciliation suite with a reduced draw count.

use nvcorr::experiment::reconcile::{run_validation, ValidationSettings};

fn main() -> nvcorr::Result<()> {
    let report = run_validation(ValidationSettings {
        phase_draws: 100,
        ensemble_draws: 20,
        seed: 5,
    })?;
    println!("{report}");
    for e in &report.entries {
        println!("{}: {}", e.id, e.expectation);
    }
    Ok(())
}
