//! Magnetic field b_z(t) seen by the NV in each protocol stage, and the
//! dipolar hemisphere geometry integral.
//!
//! The field in every stage is `B_max · (R · M_start) · x̂` for the stage's
//! rotation sequence `R`; the expanded trigonometric forms in [`expanded`]
//! exist only as cross-checks.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::model::{EnsembleAngles, Magnetization, RfDrive, SequenceTiming};
use crate::quadrature::{pairwise_sum, GaussLegendre};
use crate::rotations::{axis_or_nominal, rk, rz};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stage {
    /// First interrogation block, 0 ≤ t < 2τ.
    FirstBlock = 1,
    /// RF pulse.
    Pulse = 2,
    /// Correlation time followed by the second interrogation block.
    Correlation = 3,
}

/// Field of one stage as a function of the stage-local time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageField {
    stage: Stage,
    b_max: f64,
    omega: f64,
    rabi: f64,
    axis_phase: f64,
    start: Vector3<f64>,
}

impl StageField {
    pub fn first_block(m0: &Magnetization, omega: f64, b_max: f64) -> Self {
        StageField {
            stage: Stage::FirstBlock,
            b_max,
            omega,
            rabi: 0.0,
            axis_phase: 0.0,
            start: *m0.vector(),
        }
    }

    /// Starts from M₁ = R_z(2ωτ)·M₀.
    pub fn pulse(m0: &Magnetization, omega: f64, rabi: f64, axis_phase: f64, tau: f64, b_max: f64) -> Self {
        StageField {
            stage: Stage::Pulse,
            b_max,
            omega,
            rabi,
            axis_phase,
            start: rz(2.0 * omega * tau) * *m0.vector(),
        }
    }

    /// Starts from M₂ = R_z(ω t_p)·R_k(Ω t_p)·M₁.
    pub fn correlation(
        m0: &Magnetization,
        omega: f64,
        rabi: f64,
        axis_phase: f64,
        tau: f64,
        t_p: f64,
        b_max: f64,
    ) -> Self {
        let m1 = rz(2.0 * omega * tau) * *m0.vector();
        let m2 = rz(omega * t_p) * rk(axis_phase, rabi * t_p) * m1;
        StageField {
            stage: Stage::Correlation,
            b_max,
            omega,
            rabi: 0.0,
            axis_phase,
            start: m2,
        }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn b_max(&self) -> f64 {
        self.b_max
    }

    pub fn start_magnetization(&self) -> Magnetization {
        Magnetization::from_rotated(self.start)
    }

    /// Highest angular frequency present in b(t).
    pub fn bandwidth(&self) -> f64 {
        self.omega.abs() + self.rabi.abs()
    }

    pub fn magnetization(&self, t: f64) -> Vector3<f64> {
        match self.stage {
            Stage::Pulse => rz(self.omega * t) * rk(self.axis_phase, self.rabi * t) * self.start,
            _ => rz(self.omega * t) * self.start,
        }
    }

    /// b(t) in tesla at stage-local time t.
    pub fn eval(&self, t: f64) -> f64 {
        let v = match self.stage {
            Stage::Pulse => rk(self.axis_phase, self.rabi * t) * self.start,
            _ => self.start,
        };
        let (s, c) = (self.omega * t).sin_cos();
        self.b_max * (c * v.x - s * v.y)
    }
}

/// b₁(t) = B_max sin α cos(ωt + β).
pub fn field_stage1(angles: EnsembleAngles, omega: f64, b_max: f64) -> StageField {
    StageField::first_block(&Magnetization::from_angles(angles), omega, b_max)
}

/// b₂(t) = B_max (R_z(ωt) R_k(Ωt) M₁)·x̂, resonant drive only.
pub fn field_stage2(
    angles: EnsembleAngles,
    omega: f64,
    drive: &RfDrive,
    timing: &SequenceTiming,
    b_max: f64,
) -> Result<StageField> {
    drive.ensure_resonant(omega)?;
    let axis = axis_or_nominal(drive);
    Ok(StageField::pulse(
        &Magnetization::from_angles(angles),
        omega,
        drive.rabi(),
        axis.phase,
        timing.tau,
        b_max,
    ))
}

/// b₃(t) = B_max (R_z(ωt) M₂)·x̂, resonant drive only.
pub fn field_stage3(
    angles: EnsembleAngles,
    omega: f64,
    drive: &RfDrive,
    timing: &SequenceTiming,
    b_max: f64,
) -> Result<StageField> {
    drive.ensure_resonant(omega)?;
    let axis = axis_or_nominal(drive);
    Ok(StageField::correlation(
        &Magnetization::from_angles(angles),
        omega,
        drive.rabi(),
        axis.phase,
        timing.tau,
        timing.t_p,
        b_max,
    ))
}

/// Fully expanded trigonometric forms of the stage fields, kept as
/// independent transcriptions for cross-checking the rotation form.
/// `phi` is the axis phase of the (aligned) drive and `t` is stage-local.
pub mod expanded {
    use crate::model::EnsembleAngles;

    pub fn b1(t: f64, a: EnsembleAngles, omega: f64, b_max: f64) -> f64 {
        b_max * (a.beta + omega * t).cos() * a.alpha.sin()
    }

    /// Pulse-stage field for arbitrary τ.
    #[allow(clippy::too_many_arguments)]
    pub fn b2(t: f64, a: EnsembleAngles, omega: f64, rabi: f64, phi: f64, tau: f64, b_max: f64) -> f64 {
        let (sa, ca) = a.alpha.sin_cos();
        let b = a.beta;
        let w = omega;
        b_max
            * (ca * (phi + w * t).sin() * (rabi * t).sin()
                + 0.5
                    * sa
                    * ((b - 2.0 * phi - w * t + 2.0 * tau * w).cos() + (b + w * t + 2.0 * tau * w).cos()
                        - (b - phi + 2.0 * tau * w).sin()
                            * ((phi + w * t - rabi * t).sin() + (phi + w * t + rabi * t).sin())))
    }

    /// Pulse-stage field with ωτ = π substituted.
    pub fn b2_resonant(t: f64, a: EnsembleAngles, omega: f64, rabi: f64, phi: f64, b_max: f64) -> f64 {
        let (sa, ca) = a.alpha.sin_cos();
        let b = a.beta;
        let w = omega;
        b_max
            * ((rabi * t).sin() * ca * (phi + w * t).sin()
                + 0.5
                    * sa
                    * ((b - 2.0 * phi - w * t).cos() + (w * t + b).cos()
                        - (b - phi).sin() * ((phi + w * t - rabi * t).sin() + (phi + w * t + rabi * t).sin())))
    }

    /// Correlation-stage field for arbitrary τ.
    #[allow(clippy::too_many_arguments)]
    pub fn b3(t: f64, a: EnsembleAngles, omega: f64, rabi: f64, phi: f64, tau: f64, t_p: f64, b_max: f64) -> f64 {
        let (sa, ca) = a.alpha.sin_cos();
        let b = a.beta;
        let w = omega;
        let half = 0.5 * rabi * t_p;
        b_max
            * ((b + (w * t + w * t_p + 2.0 * w * tau)).cos() * half.cos().powi(2) * sa
                + (b - 2.0 * phi - w * t - w * t_p + 2.0 * w * tau).cos() * half.sin().powi(2) * sa
                + ca * (phi + w * (t + t_p)).sin() * (rabi * t_p).sin())
    }

    /// Three-term correlation-stage field with ωτ = π substituted (the
    /// cos²(Ωt_p/2), sin²(Ωt_p/2), sin(Ωt_p) decomposition).
    pub fn b3_resonant(t: f64, a: EnsembleAngles, omega: f64, rabi: f64, phi: f64, t_p: f64, b_max: f64) -> f64 {
        let (sa, ca) = a.alpha.sin_cos();
        let b = a.beta;
        let w = omega;
        let half = 0.5 * rabi * t_p;
        b_max
            * (half.cos().powi(2) * sa * (w * (t + t_p) + b).cos()
                + half.sin().powi(2) * sa * (b - 2.0 * phi - w * (t + t_p)).cos()
                + (rabi * t_p).sin() * ca * (phi + w * (t + t_p)).sin())
    }
}

/// Integrals of (g_x, g_y, f) over the detection hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometryIntegral {
    pub i_x: f64,
    pub i_y: f64,
    pub i_f: f64,
    /// Absolute error estimate shared by all three components.
    pub error: f64,
    pub converged: bool,
    pub depth: f64,
    pub order: usize,
}

/// Integrates g_{x,y}(r) = 3 r_z r_{x,y}/r⁵ and f(r) = (3 r_z²/r² − 1)/r³
/// over the hemisphere of radius d resting on the surface plane z = d,
/// centred directly above an NV at the origin.
///
/// Product rule in spherical coordinates about the hemisphere centre:
/// Gauss–Legendre in radius and polar angle, uniform (periodic trapezoid)
/// in azimuth. The value is taken at order 2n and the error estimate is
/// the change from order n, plus a round-off floor.
pub fn hemisphere_integral(depth: f64, order: usize) -> Result<GeometryIntegral> {
    ensure_finite("depth", depth)?;
    if depth <= 0.0 {
        return Err(Error::domain(format!("depth must be positive, got {depth}")));
    }
    if order < 2 {
        return Err(Error::domain(format!(
            "quadrature order must be at least 2, got {order}"
        )));
    }
    let coarse = hemisphere_rule(depth, order);
    let fine = hemisphere_rule(depth, 2 * order);
    let change = (0..3)
        .map(|i| (fine.values[i] - coarse.values[i]).abs())
        .fold(0.0, f64::max);
    let floor = 1e-13 * fine.magnitudes.iter().cloned().fold(0.0, f64::max);
    let error = change + floor;
    let converged = error <= 1e-8 * fine.values[2].abs().max(f64::MIN_POSITIVE);
    Ok(GeometryIntegral {
        i_x: fine.values[0],
        i_y: fine.values[1],
        i_f: fine.values[2],
        error,
        converged,
        depth,
        order,
    })
}

struct RuleResult {
    values: [f64; 3],
    /// Σ|w·integrand| per component, for the round-off floor.
    magnitudes: [f64; 3],
}

fn hemisphere_rule(depth: f64, n: usize) -> RuleResult {
    let gl = GaussLegendre::new(n);
    let n_az = 2 * n;
    let d_az = TAU / n_az as f64;
    let radial: Vec<(f64, f64)> = gl.mapped(0.0, depth).collect();
    let polar: Vec<(f64, f64)> = gl.mapped(0.0, 0.5 * PI).collect();
    let mut terms: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut magnitudes = [0.0; 3];
    for &(rho, w_rho) in &radial {
        for &(theta, w_theta) in &polar {
            let (st, ct) = theta.sin_cos();
            let jac = rho * rho * st * w_rho * w_theta * d_az;
            for k in 0..n_az {
                let az = d_az * k as f64;
                let (sp, cp) = az.sin_cos();
                let x = rho * st * cp;
                let y = rho * st * sp;
                let z = depth + rho * ct;
                let r2 = x * x + y * y + z * z;
                let r = r2.sqrt();
                let r5 = r2 * r2 * r;
                let vals = [3.0 * z * x / r5, 3.0 * z * y / r5, (3.0 * z * z / r2 - 1.0) / (r2 * r)];
                for c in 0..3 {
                    let term = jac * vals[c];
                    terms[c].push(term);
                    magnitudes[c] += term.abs();
                }
            }
        }
    }
    RuleResult {
        values: [
            pairwise_sum(&terms[0]),
            pairwise_sum(&terms[1]),
            pairwise_sum(&terms[2]),
        ],
        magnitudes,
    }
}
