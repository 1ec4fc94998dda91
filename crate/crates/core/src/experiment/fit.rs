//! Known-frequency sinusoid fit y ≈ a cos ωτ̃ + b sin ωτ̃ + c.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest condition number of the column-scaled normal matrix accepted.
pub const MAX_CONDITION: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinusoidFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub amplitude: f64,
    /// atan2(−b, a), so that y = amplitude·cos(ωτ̃ + phase) + c.
    pub phase: f64,
    pub rms_residual: f64,
    pub condition: f64,
}

impl SinusoidFit {
    /// a − i b: the trace is Re[(a − i b) e^{iωτ̃}] + c.
    pub fn complex_amplitude(&self) -> Complex64 {
        Complex64::new(self.a, -self.b)
    }
}

/// In-phase and quadrature parts of one fitted amplitude relative to a
/// reference fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeRatio {
    /// Re(z / z₀).
    pub in_phase: f64,
    /// |Im(z / z₀)|.
    pub quadrature: f64,
}

pub fn amplitude_ratio(fit: &SinusoidFit, reference: &SinusoidFit) -> Option<AmplitudeRatio> {
    let z0 = reference.complex_amplitude();
    if z0.norm() == 0.0 {
        return None;
    }
    let r = fit.complex_amplitude() / z0;
    Some(AmplitudeRatio {
        in_phase: r.re,
        quadrature: r.im.abs(),
    })
}

/// Linear least squares via column-scaled normal equations.
pub fn fit_sinusoid(tau: &[f64], signal: &[f64], omega: f64) -> Result<SinusoidFit> {
    if tau.len() != signal.len() {
        return Err(Error::domain(format!(
            "trace has {} times but {} samples",
            tau.len(),
            signal.len()
        )));
    }
    if tau.len() < 4 {
        return Err(Error::domain("a sinusoid fit needs at least 4 points"));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::domain(format!("fit frequency must be positive, got {omega}")));
    }
    let rows: Vec<Vector3<f64>> = tau
        .iter()
        .map(|t| {
            let (s, c) = (omega * t).sin_cos();
            Vector3::new(c, s, 1.0)
        })
        .collect();
    let mut scale = Vector3::zeros();
    for r in &rows {
        scale += r.component_mul(r);
    }
    let scale = scale.map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 });
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (r, y) in rows.iter().zip(signal) {
        let rs = r.component_mul(&scale);
        normal += rs * rs.transpose();
        rhs += rs * *y;
    }
    let eig = SymmetricEigen::new(normal).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let span =
        tau.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - tau.iter().cloned().fold(f64::INFINITY, f64::min);
    let span_periods = span * omega / TAU;
    if condition > MAX_CONDITION {
        // The scaled normal matrix degenerates like span⁻⁴.
        let suggested = if condition.is_finite() && span_periods > 0.0 {
            span_periods * (condition / MAX_CONDITION).powf(0.25)
        } else {
            0.05
        };
        return Err(Error::Conditioning {
            condition,
            span_periods,
            suggested_periods: suggested,
        });
    }
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::domain("normal matrix is not positive definite"))?;
    let x = chol.solve(&rhs).component_mul(&scale);
    let (a, b, c) = (x.x, x.y, x.z);
    let sq: f64 = rows.iter().zip(signal).map(|(r, y)| (r.dot(&x) - y).powi(2)).sum();
    Ok(SinusoidFit {
        a,
        b,
        c,
        amplitude: a.hypot(b),
        phase: (-b).atan2(a),
        rms_residual: (sq / tau.len() as f64).sqrt(),
        condition,
    })
}
