//! Exact SO(3) propagation of the nuclear magnetization.
//!
//! Larmor precession is the active rotation `R_z(ωt)` and a resonant RF
//! pulse (in the rotating-wave approximation) adds a rotation about the
//! transverse axis k̂ = (cos φ, sin φ, 0):
//!
//! ```text
//! M(t) = R_z(ωt) · R_k(φ, Ωt) · M₀
//! ```
//!
//! Entry layout used by [`rotation_k`], with c = cos θ, s = sin θ:
//!
//! | row | col 1                    | col 2                    | col 3       |
//! |-----|--------------------------|--------------------------|-------------|
//! | 1   | c − (c − 1) cos²φ        | −(c − 1) cos φ sin φ     | s sin φ     |
//! | 2   | −(c − 1) cos φ sin φ     | c − (c − 1) sin²φ        | −s cos φ    |
//! | 3   | −s sin φ                 | s cos φ                  | 1 − 2 sin²(θ/2) |
//!
//! This is the right-handed axis-angle rotation about k̂; for φ = 0 it is
//! the usual rotation about x̂ (ẑ → −ŷ at θ = π/2).

use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{ensure_finite, Error, Result};
use crate::model::{Magnetization, RfDrive};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix3(Matrix3<f64>);

impl RotationMatrix3 {
    pub fn identity() -> Self {
        RotationMatrix3(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        RotationMatrix3(self.0.transpose())
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// Largest entry of |RᵀR − I|.
    pub fn orthogonality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    pub fn rotate(&self, m: &Magnetization) -> Magnetization {
        Magnetization::from_rotated(self.0 * m.vector())
    }
}

impl Mul for RotationMatrix3 {
    type Output = RotationMatrix3;

    fn mul(self, rhs: RotationMatrix3) -> RotationMatrix3 {
        RotationMatrix3(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for RotationMatrix3 {
    type Output = Vector3<f64>;

    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Rotation axis of a resonant drive in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveAxis {
    pub axis: Vector3<f64>,
    /// Azimuth of k̂ in the xy-plane, rad.
    pub phase: f64,
}

impl DriveAxis {
    pub fn from_phase(phase: f64) -> Self {
        let (s, c) = phase.sin_cos();
        DriveAxis {
            axis: Vector3::new(c, s, 0.0),
            phase,
        }
    }
}

pub(crate) fn rz(theta: f64) -> RotationMatrix3 {
    let (s, c) = theta.sin_cos();
    RotationMatrix3(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
}

pub(crate) fn rk(phi: f64, theta: f64) -> RotationMatrix3 {
    let (s, c) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let half = (0.5 * theta).sin();
    RotationMatrix3(Matrix3::new(
        c - (c - 1.0) * cp * cp,
        -(c - 1.0) * cp * sp,
        s * sp,
        -(c - 1.0) * cp * sp,
        c - (c - 1.0) * sp * sp,
        -cp * s,
        -s * sp,
        cp * s,
        1.0 - 2.0 * half * half,
    ))
}

/// Active rotation by `theta` about ẑ.
pub fn rotation_z(theta: f64) -> Result<RotationMatrix3> {
    ensure_finite("theta", theta)?;
    Ok(rz(theta))
}

/// Rotation by `theta` about k̂ = (cos φ_RF, sin φ_RF, 0).
pub fn rotation_k(phi_rf: f64, theta: f64) -> Result<RotationMatrix3> {
    ensure_finite("phi_rf", phi_rf)?;
    ensure_finite("theta", theta)?;
    Ok(rk(phi_rf, theta))
}

/// Rotation axis of a possibly misaligned drive:
/// φ_eff = φ_RF − atan2(Ω_y, Ω_x).
pub fn effective_axis(drive: &RfDrive) -> Result<DriveAxis> {
    if !drive.is_active() {
        return Err(Error::domain("drive amplitude is zero; the rotation axis is undefined"));
    }
    Ok(DriveAxis::from_phase(drive.phi_rf - drive.omega_y.atan2(drive.omega_x)))
}

/// Effective axis, falling back to the nominal φ_RF axis for a switched-off
/// drive (the rotation angle is then zero and the axis is irrelevant).
pub(crate) fn axis_or_nominal(drive: &RfDrive) -> DriveAxis {
    effective_axis(drive).unwrap_or_else(|_| DriveAxis::from_phase(drive.phi_rf))
}

/// Free precession: R_z(ωt)·M₀.
pub fn propagate_free(m0: &Magnetization, omega: f64, t: f64) -> Result<Magnetization> {
    ensure_finite("omega", omega)?;
    ensure_finite("t", t)?;
    Ok(rz(omega * t).rotate(m0))
}

/// Resonant driven evolution: R_z(ωt)·R_k(Ωt)·M₀ with Ω and k̂ from
/// [`effective_axis`].
pub fn propagate_driven(m0: &Magnetization, omega: f64, drive: &RfDrive, t: f64) -> Result<Magnetization> {
    ensure_finite("omega", omega)?;
    ensure_finite("t", t)?;
    drive.ensure_resonant(omega)?;
    let axis = axis_or_nominal(drive);
    Ok((rz(omega * t) * rk(axis.phase, drive.rabi() * t)).rotate(m0))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

    use approx_eq::close;
    use proptest::prelude::*;

    use super::*;

    mod approx_eq {
        use nalgebra::Vector3;

        pub fn close(a: &Vector3<f64>, b: &Vector3<f64>, tol: f64) -> bool {
            (a - b).amax() <= tol
        }
    }

    /// Rodrigues formula built from the cross-product matrix; independent of
    /// the explicit entry table.
    fn rodrigues(axis: Vector3<f64>, theta: f64) -> Matrix3<f64> {
        let k = axis.normalize();
        let kx = k.cross_matrix();
        Matrix3::identity() + kx * theta.sin() + kx * kx * (1.0 - theta.cos())
    }

    #[test]
    fn rz_identity_and_quarter_turn() {
        assert_eq!(rotation_z(0.0).unwrap(), RotationMatrix3::identity());
        let y = rotation_z(FRAC_PI_2).unwrap() * Vector3::x();
        assert!(close(&y, &Vector3::y(), 1e-15));
        assert!(rotation_z(f64::NAN).is_err());
    }

    #[test]
    fn rk_about_x_entries() {
        let theta = 0.83;
        let r = rotation_k(0.0, theta).unwrap();
        assert!((r.matrix()[(2, 2)] - theta.cos()).abs() < 1e-15);
        assert!((r.matrix()[(1, 2)] + theta.sin()).abs() < 1e-15);
        assert!(rotation_k(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn rk_full_turn_is_identity() {
        for phi in [0.0, 0.4, 2.0, 5.5] {
            let r = rotation_k(phi, TAU).unwrap();
            assert!((r.matrix() - Matrix3::identity()).amax() < 1e-12);
        }
    }

    #[test]
    fn z_to_minus_y_under_x_quarter_turn() {
        let m = propagate_driven(
            &Magnetization::unit_z(),
            1.0,
            &RfDrive::aligned(FRAC_PI_2, 1.0, 0.0).unwrap(),
            1.0,
        );
        // ωt = 1 here, so undo the Larmor part to isolate R_k.
        let m = rotation_z(-1.0).unwrap().rotate(&m.unwrap());
        assert!(close(m.vector(), &-Vector3::y(), 1e-15));
        let direct = rotation_k(0.0, FRAC_PI_2).unwrap() * Vector3::z();
        assert!(close(&direct, &-Vector3::y(), 1e-15));
    }

    #[test]
    fn effective_axis_cases() {
        let a = effective_axis(&RfDrive::aligned(1.0, 1.0, 0.3).unwrap()).unwrap();
        assert!((a.phase - 0.3).abs() < 1e-15);
        assert!(close(&a.axis, &Vector3::new(0.3f64.cos(), 0.3f64.sin(), 0.0), 1e-15));

        let b = effective_axis(&RfDrive::misaligned(2.0, 2.0, 1.0, FRAC_PI_4).unwrap()).unwrap();
        assert!(b.phase.abs() < 1e-15);
        assert!(close(&b.axis, &Vector3::x(), 1e-15));

        let c = effective_axis(&RfDrive::misaligned(0.0, 3.0, 1.0, FRAC_PI_2).unwrap()).unwrap();
        assert!(c.phase.abs() < 1e-15);

        assert!(effective_axis(&RfDrive::aligned(0.0, 1.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn free_precession_cases() {
        let z = propagate_free(&Magnetization::unit_z(), 3.0, 17.0).unwrap();
        assert!(close(z.vector(), &Vector3::z(), 0.0));
        let y = propagate_free(&Magnetization::unit_x(), 2.0, PI / 4.0).unwrap();
        assert!(close(y.vector(), &Vector3::y(), 1e-15));
    }

    #[test]
    fn driven_with_zero_angle_is_free() {
        let m0 = Magnetization::new(0.6, 0.0, 0.8).unwrap();
        let drive = RfDrive::aligned(5.0, 2.0, 0.4).unwrap();
        let driven = propagate_driven(&m0, 2.0, &drive, 0.0).unwrap();
        let free = propagate_free(&m0, 2.0, 0.0).unwrap();
        assert_eq!(driven, free);
        let off = RfDrive::aligned(5.0, 2.5, 0.4).unwrap();
        assert!(matches!(
            propagate_driven(&m0, 2.0, &off, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn norm_preserved_over_ten_thousand_rotations() {
        let mut m = Magnetization::new(0.48, -0.6, 0.64).unwrap();
        let mut r = RotationMatrix3::identity();
        for i in 0..10_000 {
            let a = 0.37 * i as f64;
            let step = rz(a) * rk(1.3 * a, 0.91 + a);
            m = step.rotate(&m);
            r = step * r;
        }
        assert!((1.0 - m.norm()).abs() <= 1e-12);
        assert!(r.orthogonality_defect() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rz_composition(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let lhs = rz(a) * rz(b);
            let rhs = rz(a + b);
            prop_assert!((lhs.matrix() - rhs.matrix()).amax() < 1e-12);
        }

        #[test]
        fn rk_matches_rodrigues(phi in -10.0f64..10.0, theta in -20.0f64..20.0) {
            let (s, c) = phi.sin_cos();
            let oracle = rodrigues(Vector3::new(c, s, 0.0), theta);
            prop_assert!((rk(phi, theta).matrix() - oracle).amax() < 1e-12);
        }

        #[test]
        fn rk_fixes_its_axis(phi in -10.0f64..10.0, theta in -20.0f64..20.0) {
            let k = DriveAxis::from_phase(phi).axis;
            prop_assert!(close(&(rk(phi, theta) * k), &k, 1e-14));
        }

        #[test]
        fn rotations_are_special_orthogonal(phi in -10.0f64..10.0, theta in -20.0f64..20.0) {
            for r in [rz(theta), rk(phi, theta), rz(phi) * rk(theta, phi)] {
                prop_assert!(r.orthogonality_defect() < 1e-12);
                prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn conjugation_identity(phi in -10.0f64..10.0, theta in -20.0f64..20.0) {
            let conj = rz(phi) * rk(0.0, theta) * rz(-phi);
            prop_assert!((rk(phi, theta).matrix() - conj.matrix()).amax() < 1e-12);
        }

        #[test]
        fn misalignment_equivalence(ox in 0.1f64..5.0, oy in -5.0f64..5.0, phi in -3.0f64..3.0, t in 0.0f64..4.0, a in 0.0f64..PI, b in 0.0f64..6.2) {
            let omega = 7.0;
            let m0 = Magnetization::from_angles(crate::model::EnsembleAngles::new(a, b).unwrap());
            let mis = RfDrive::misaligned(ox, oy, omega, phi).unwrap();
            let eq = RfDrive::aligned(ox.hypot(oy), omega, phi - oy.atan2(ox)).unwrap();
            let lhs = propagate_driven(&m0, omega, &mis, t).unwrap();
            let rhs = propagate_driven(&m0, omega, &eq, t).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
