//! Literal 2×2 unitary product for the NV readout.
//!
//! U = e^{−iπ/4 σx} σy e^{−iφ₄/2 σz} e^{−iπ/4 σy} e^{−iφ₂/2 σz} e^{−iφ₃/2 σz}
//!     e^{−iπ/4 σx} σy e^{−iφ₁/2 σz} e^{−iπ/4 σy}
//!
//! The NV starts in |0⟩, taken as the σz = −1 basis state (0, 1)ᵀ of the
//! two-level {|0⟩, |−1⟩} subspace.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::phases::PhaseSet;
use crate::readout::ReadoutSignal;

type C = Complex64;
pub type Unitary2 = Matrix2<C>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn sigma_x() -> Unitary2 {
    Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

pub fn sigma_y() -> Unitary2 {
    Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}

pub fn sigma_z() -> Unitary2 {
    Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}

/// exp(−i θ/2 σ) for a Pauli matrix σ.
pub fn pauli_rotation(sigma: &Unitary2, theta: f64) -> Unitary2 {
    let (s, co) = (0.5 * theta).sin_cos();
    Unitary2::identity() * c(co, 0.0) - sigma * c(0.0, s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitPropagator {
    /// Factors in the order they are written (leftmost first).
    factors: Vec<Unitary2>,
}

impl QubitPropagator {
    pub fn from_phases(p: &PhaseSet) -> Self {
        let half_pi = 2.0 * FRAC_PI_4;
        let (x, y, z) = (sigma_x(), sigma_y(), sigma_z());
        let factors = vec![
            pauli_rotation(&x, half_pi),
            y,
            pauli_rotation(&z, p.phi4),
            pauli_rotation(&y, half_pi),
            pauli_rotation(&z, p.phi2),
            pauli_rotation(&z, p.phi3),
            pauli_rotation(&x, half_pi),
            y,
            pauli_rotation(&z, p.phi1),
            pauli_rotation(&y, half_pi),
        ];
        QubitPropagator { factors }
    }

    pub fn factors(&self) -> &[Unitary2] {
        &self.factors
    }

    pub fn product(&self) -> Unitary2 {
        self.factors.iter().fold(Unitary2::identity(), |acc, f| acc * f)
    }

    /// Initial NV state |0⟩.
    pub fn initial_state() -> Vector2<C> {
        Vector2::new(c(0.0, 0.0), c(1.0, 0.0))
    }
}

/// max |(U†U − I)ᵢⱼ|.
pub fn unitarity_defect(u: &Unitary2) -> f64 {
    (u.adjoint() * u - Unitary2::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// ⟨σ_z⟩ after applying the propagator to |0⟩.
pub fn readout_from_propagator(phases: &PhaseSet) -> ReadoutSignal {
    let psi = QubitPropagator::from_phases(phases).product() * QubitPropagator::initial_state();
    let value = psi[0].norm_sqr() - psi[1].norm_sqr();
    ReadoutSignal {
        value,
        out_of_range: value.abs() > 1.0 + 1e-12,
    }
}
