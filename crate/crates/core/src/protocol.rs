use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::model::{PhysicalConstants, RfDrive, SequenceTiming};
use crate::rotations::axis_or_nominal;

/// Everything the field, phase and ensemble layers need about one run of
/// the protocol, with any RF misalignment already folded into an
/// effective Rabi rate and axis phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolParams {
    /// Nuclear Larmor frequency ω, rad/s.
    pub omega: f64,
    /// Effective Rabi rate Ω, rad/s.
    pub rabi: f64,
    /// Azimuth of the effective drive axis k̂, rad.
    pub axis_phase: f64,
    pub timing: SequenceTiming,
    /// Field amplitude B_max, T.
    pub b_max: f64,
    /// |γ_e|, rad/s/T.
    pub gamma_e_abs: f64,
}

impl ProtocolParams {
    pub fn new(
        omega: f64,
        rabi: f64,
        axis_phase: f64,
        timing: SequenceTiming,
        b_max: f64,
        gamma_e_abs: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("omega", omega),
            ("rabi", rabi),
            ("axis_phase", axis_phase),
            ("b_max", b_max),
            ("gamma_e_abs", gamma_e_abs),
        ] {
            ensure_finite(name, v)?;
        }
        if omega <= 0.0 {
            return Err(Error::domain(format!("omega must be positive, got {omega}")));
        }
        if rabi < 0.0 {
            return Err(Error::domain(format!("rabi must be non-negative, got {rabi}")));
        }
        if gamma_e_abs <= 0.0 {
            return Err(Error::domain("gamma_e_abs must be positive"));
        }
        Ok(ProtocolParams {
            omega,
            rabi,
            axis_phase,
            timing,
            b_max,
            gamma_e_abs,
        })
    }

    /// Builds parameters from a physical drive, applying the misalignment
    /// rule φ → φ − atan2(Ω_y, Ω_x), Ω → |(Ω_x, Ω_y)|. The drive must be on
    /// resonance with ω.
    pub fn from_drive(
        omega: f64,
        drive: &RfDrive,
        timing: SequenceTiming,
        b_max: f64,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        drive.ensure_resonant(omega)?;
        let axis = axis_or_nominal(drive);
        Self::new(omega, drive.rabi(), axis.phase, timing, b_max, constants.gamma_e_abs())
    }

    pub fn with_tau_corr(&self, tau_corr: f64) -> Result<Self> {
        Ok(ProtocolParams {
            timing: self.timing.with_tau_corr(tau_corr)?,
            ..*self
        })
    }

    /// Natural phase scale B_max |γ_e| / ω.
    pub fn phase_scale(&self) -> f64 {
        self.b_max * self.gamma_e_abs / self.omega
    }

    /// Ensemble prefactor K = 2π B_max² γ_e² / ω².
    pub fn prefactor(&self) -> f64 {
        TAU * self.phase_scale().powi(2)
    }

    /// Pulse area θ = Ω t_p.
    pub fn rotation_angle(&self) -> f64 {
        self.rabi * self.timing.t_p
    }

    /// Correlation phase ω (2 t_p + τ̃) appearing in the ensemble signal.
    pub fn correlation_phase(&self) -> f64 {
        self.omega * (2.0 * self.timing.t_p + self.timing.tau_corr)
    }
}
