//! Shared domain types and physical constants.
//!
//! Units are SI throughout, with every frequency an angular frequency in
//! rad/s.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};

/// Tolerance used to decide that `omega * tau == pi`.
pub const RESONANCE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    /// Electron gyromagnetic ratio, rad/s/T (negative).
    pub gamma_e: f64,
    /// Nuclear gyromagnetic ratio, rad/s/T.
    pub gamma_n: f64,
    /// NV zero-field splitting D, rad/s.
    pub zero_field_splitting: f64,
    pub hbar: f64,
    pub mu0: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            gamma_e: -TAU * 28.8e9,
            gamma_n: TAU * 42.58e6,
            zero_field_splitting: TAU * 2.87e9,
            hbar: 1.054_571_817e-34,
            mu0: 1.256_637_062_12e-6,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_e", self.gamma_e),
            ("gamma_n", self.gamma_n),
            ("zero_field_splitting", self.zero_field_splitting),
            ("hbar", self.hbar),
            ("mu0", self.mu0),
        ] {
            ensure_finite(name, v)?;
        }
        if self.gamma_e >= 0.0 {
            return Err(Error::domain("gamma_e must be negative"));
        }
        if self.gamma_n <= 0.0 {
            return Err(Error::domain("gamma_n must be positive"));
        }
        Ok(())
    }

    /// |γ_e|, the coupling factor that multiplies every phase integral.
    pub fn gamma_e_abs(&self) -> f64 {
        self.gamma_e.abs()
    }
}

/// Unit vector describing the coherent part of the detected nuclear
/// ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Magnetization(Vector3<f64>);

impl Magnetization {
    pub const NORM_TOL: f64 = 1e-9;

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_vector(Vector3::new(x, y, z))
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::domain("magnetization components must be finite"));
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::domain(format!(
                "magnetization must be a unit vector, norm = {norm}"
            )));
        }
        Ok(Magnetization(v))
    }

    /// Initial magnetization M₀ from its polar and azimuthal angles.
    pub fn from_angles(angles: EnsembleAngles) -> Self {
        let (sa, ca) = angles.alpha.sin_cos();
        let (sb, cb) = angles.beta.sin_cos();
        Magnetization(Vector3::new(sa * cb, sa * sb, ca))
    }

    pub fn unit_x() -> Self {
        Magnetization(Vector3::x())
    }

    pub fn unit_y() -> Self {
        Magnetization(Vector3::y())
    }

    pub fn unit_z() -> Self {
        Magnetization(Vector3::z())
    }

    pub fn basis() -> [Self; 3] {
        [Self::unit_x(), Self::unit_y(), Self::unit_z()]
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Wraps the output of a norm-preserving map without re-checking it.
    pub(crate) fn from_rotated(v: Vector3<f64>) -> Self {
        Magnetization(v)
    }
}

/// Orientation (α, β) of the initial magnetization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleAngles {
    pub alpha: f64,
    pub beta: f64,
}

impl EnsembleAngles {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&alpha) {
            return Err(Error::domain(format!("alpha = {alpha} outside [0, pi]")));
        }
        if !(0.0..TAU).contains(&beta) {
            return Err(Error::domain(format!("beta = {beta} outside [0, 2pi)")));
        }
        Ok(EnsembleAngles { alpha, beta })
    }
}

/// RF drive parameters. Rabi rates are the rotating-frame nutation rates
/// produced by the x̂ and ŷ components of the linearly polarised RF field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RfDrive {
    pub omega_x: f64,
    pub omega_y: f64,
    /// Carrier angular frequency ω_RF.
    pub omega_rf: f64,
    /// Carrier phase referred to the global time origin t = 0.
    pub phi_rf: f64,
}

impl RfDrive {
    /// Drive along x̂ only, the geometry of an antenna perpendicular to the
    /// diamond surface.
    pub fn aligned(rabi: f64, omega_rf: f64, phi_rf: f64) -> Result<Self> {
        Self::misaligned(rabi, 0.0, omega_rf, phi_rf)
    }

    pub fn misaligned(omega_x: f64, omega_y: f64, omega_rf: f64, phi_rf: f64) -> Result<Self> {
        for (name, v) in [
            ("omega_x", omega_x),
            ("omega_y", omega_y),
            ("omega_rf", omega_rf),
            ("phi_rf", phi_rf),
        ] {
            ensure_finite(name, v)?;
        }
        Ok(RfDrive {
            omega_x,
            omega_y,
            omega_rf,
            phi_rf,
        })
    }

    /// Effective Rabi rate Ω = sqrt(Ωx² + Ωy²).
    pub fn rabi(&self) -> f64 {
        self.omega_x.hypot(self.omega_y)
    }

    pub fn is_active(&self) -> bool {
        self.rabi() > 0.0
    }

    pub fn is_resonant_with(&self, omega: f64) -> bool {
        (self.omega_rf - omega).abs() <= RESONANCE_REL_TOL * omega.abs()
    }

    pub fn ensure_resonant(&self, omega: f64) -> Result<()> {
        if self.is_resonant_with(omega) {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "off-resonant RF (omega_rf = {:.6e} rad/s, larmor = {:.6e} rad/s) has no closed form; use the Bloch oracle",
                self.omega_rf, omega
            )))
        }
    }
}

/// Event timing of the protocol.
///
/// Stage 1 (first interrogation block) lasts 2τ, stage 2 (RF pulse) lasts
/// t_p and begins at t₁ = 2τ, stage 3 (correlation time then second
/// block) begins at t₂ = 2τ + t_p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SequenceTiming {
    pub tau: f64,
    pub t_p: f64,
    pub tau_corr: f64,
}

impl SequenceTiming {
    pub fn new(tau: f64, t_p: f64, tau_corr: f64) -> Result<Self> {
        for (name, v) in [("tau", tau), ("t_p", t_p), ("tau_corr", tau_corr)] {
            ensure_finite(name, v)?;
            if v < 0.0 {
                return Err(Error::domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(SequenceTiming { tau, t_p, tau_corr })
    }

    /// Timing with τ set by the resonance condition ωτ = π.
    pub fn resonant(omega: f64, t_p: f64, tau_corr: f64) -> Result<Self> {
        Self::new(resonant_tau(omega)?, t_p, tau_corr)
    }

    pub fn t1(&self) -> f64 {
        2.0 * self.tau
    }

    pub fn t2(&self) -> f64 {
        2.0 * self.tau + self.t_p
    }

    pub fn with_tau_corr(&self, tau_corr: f64) -> Result<Self> {
        Self::new(self.tau, self.t_p, tau_corr)
    }

    pub fn is_resonant(&self, omega: f64) -> bool {
        (omega * self.tau - PI).abs() <= RESONANCE_REL_TOL * PI
    }

    pub fn ensure_resonant(&self, omega: f64) -> Result<()> {
        if self.is_resonant(omega) {
            Ok(())
        } else {
            Err(Error::NonResonant {
                product: omega * self.tau,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NvSample {
    /// External field along the NV axis, T.
    pub b_ext: f64,
    /// NV depth below the surface, m.
    pub depth: f64,
    /// Nuclear spin density, m⁻³.
    pub spin_density: f64,
    /// Phenomenological transverse coupling amplitude, T.
    pub b_max: f64,
}

impl Default for NvSample {
    fn default() -> Self {
        NvSample {
            b_ext: 31.2e-3,
            depth: 5e-9,
            spin_density: 6e28,
            b_max: 1.0,
        }
    }
}

/// Nuclear Larmor frequency ω = γ_n B_ext.
pub fn larmor_frequency(sample: &NvSample, constants: &PhysicalConstants) -> Result<f64> {
    ensure_finite("b_ext", sample.b_ext)?;
    if sample.b_ext <= 0.0 {
        return Err(Error::domain(format!("b_ext must be positive, got {}", sample.b_ext)));
    }
    constants.validate()?;
    Ok(constants.gamma_n * sample.b_ext)
}

/// Half interrogation block τ = π/ω.
pub fn resonant_tau(omega: f64) -> Result<f64> {
    ensure_finite("omega", omega)?;
    if omega <= 0.0 {
        return Err(Error::domain(format!("omega must be positive, got {omega}")));
    }
    Ok(PI / omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_constants() {
        let c = PhysicalConstants::default();
        c.validate().unwrap();
        assert!((c.gamma_e.abs() / TAU - 28.8e9).abs() < 1e-3);
        assert!((c.gamma_n / TAU - 42.58e6).abs() < 1e-6);
        assert!((c.zero_field_splitting / TAU - 2.87e9).abs() < 1e-3);
    }

    #[test]
    fn larmor_at_31_2_mt() {
        let f = larmor_frequency(&NvSample::default(), &PhysicalConstants::default()).unwrap() / TAU;
        assert!((f - 1.328_496e6).abs() < 1.0);
        assert_eq!((f / 1e4).round() / 100.0, 1.33);
    }

    #[test]
    fn larmor_at_one_tesla() {
        let s = NvSample {
            b_ext: 1.0,
            ..NvSample::default()
        };
        let f = larmor_frequency(&s, &PhysicalConstants::default()).unwrap() / TAU;
        assert!((f - 42.58e6).abs() < 1e-6);
    }

    #[test]
    fn larmor_rejects_zero_field() {
        let s = NvSample {
            b_ext: 0.0,
            ..NvSample::default()
        };
        assert!(matches!(
            larmor_frequency(&s, &PhysicalConstants::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn resonant_tau_values() {
        let tau = resonant_tau(TAU * 1.329e6).unwrap();
        assert!((tau - 376.2e-9).abs() < 0.05e-9);
        assert_eq!(resonant_tau(PI).unwrap(), 1.0);
        assert!(resonant_tau(0.0).is_err());
        assert!(resonant_tau(-1.0).is_err());
    }

    #[test]
    fn angle_ranges() {
        assert!(EnsembleAngles::new(0.0, 0.0).is_ok());
        assert!(EnsembleAngles::new(PI, 6.2).is_ok());
        assert!(EnsembleAngles::new(-0.1, 0.0).is_err());
        assert!(EnsembleAngles::new(0.1, TAU).is_err());
    }

    #[test]
    fn timing_validation() {
        assert!(SequenceTiming::new(1e-6, -1e-6, 0.0).is_err());
        let t = SequenceTiming::new(1e-6, 30e-6, 60e-6).unwrap();
        assert_eq!(t.t1(), 2e-6);
        assert_eq!(t.t2(), 32e-6);
        assert!(t.t2() >= t.t1());
        let omega = TAU * 1.33e6;
        assert!(SequenceTiming::resonant(omega, 30e-6, 60e-6)
            .unwrap()
            .is_resonant(omega));
        assert!(matches!(t.ensure_resonant(omega), Err(Error::NonResonant { .. })));
    }

    #[test]
    fn magnetization_norm_check() {
        assert!(Magnetization::new(1.0, 0.0, 0.0).is_ok());
        assert!(Magnetization::new(1.0, 1.0, 0.0).is_err());
        let m = Magnetization::from_angles(EnsembleAngles::new(0.7, 2.0).unwrap());
        assert!((m.norm() - 1.0).abs() < 1e-15);
    }
}
