//! Accumulated NV phases φ₁…φ₄.
//!
//! Quadrature of the stage fields is the reference; the closed forms below
//! are checked against it.
//!
//! Window convention: each stage field is written in its own stage-local
//! time, but the integration windows are placed on the global clock:
//!
//! | phase | field | windows                                   |
//! |-------|-------|-------------------------------------------|
//! | φ₁    | b₁    | +[0, τ], −[τ, 2τ]                          |
//! | φ₂    | b₂    | +[2τ, 2τ + t_p]                            |
//! | φ₃    | b₃    | +[t₂, t₂ + τ̃]                              |
//! | φ₄    | b₃    | +[t₂ + τ̃, t₂ + τ̃ + τ], −[t₂ + τ̃ + τ, t₂ + τ̃ + 2τ] |
//!
//! with t₂ = 2τ + t_p. This is the convention under which the closed forms
//! (and the ensemble law built from them) hold; [`TogglingPattern`] carries
//! the window offset explicitly.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::field::StageField;
use crate::model::{EnsembleAngles, Magnetization};
use crate::protocol::ProtocolParams;
use crate::quadrature::{AdaptiveIntegrator, Estimate};

/// Relative distance |ω ∓ Ω|/ω below which the general φ₂ closed form is
/// treated as singular.
pub const SINGULAR_REL_TOL: f64 = 1e-6;

/// Default Gauss–Legendre panel order for phase integrals.
pub const DEFAULT_PHASE_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PhaseSet {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
    pub phi4: f64,
}

impl PhaseSet {
    pub fn new(phi1: f64, phi2: f64, phi3: f64, phi4: f64) -> Self {
        PhaseSet { phi1, phi2, phi3, phi4 }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        PhaseSet::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.phi1, self.phi2, self.phi3, self.phi4]
    }

    pub fn scaled(self, k: f64) -> Self {
        PhaseSet::from_array(self.to_array().map(|v| k * v))
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub duration: f64,
    pub sign: f64,
}

/// Sign modulation imposed by π pulses on a field integral, placed on the
/// time axis of the field it is applied to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TogglingPattern {
    start: f64,
    segments: Vec<Segment>,
}

impl TogglingPattern {
    pub fn new(start: f64, segments: Vec<Segment>) -> Result<Self> {
        ensure_finite("pattern start", start)?;
        if segments.is_empty() {
            return Err(Error::domain("toggling pattern has no segments"));
        }
        for s in &segments {
            ensure_finite("segment duration", s.duration)?;
            if s.duration <= 0.0 {
                return Err(Error::domain(format!(
                    "segment duration must be positive, got {}",
                    s.duration
                )));
            }
            if s.sign != 1.0 && s.sign != -1.0 {
                return Err(Error::domain(format!("segment sign must be +1 or -1, got {}", s.sign)));
            }
        }
        Ok(TogglingPattern { start, segments })
    }

    /// (+τ, −τ) Hahn-echo block.
    pub fn echo(start: f64, tau: f64) -> Result<Self> {
        Self::new(
            start,
            vec![
                Segment {
                    duration: tau,
                    sign: 1.0,
                },
                Segment {
                    duration: tau,
                    sign: -1.0,
                },
            ],
        )
    }

    /// One un-toggled window.
    pub fn single(start: f64, duration: f64) -> Result<Self> {
        Self::new(start, vec![Segment { duration, sign: 1.0 }])
    }

    /// XY8-N block: 8N π pulses spaced by `interpulse`, half intervals at
    /// either end. Total duration 8N·interpulse.
    pub fn xy8(start: f64, interpulse: f64, repetitions: usize) -> Result<Self> {
        if repetitions == 0 {
            return Err(Error::domain("XY8 block needs at least one repetition"));
        }
        let pulses = 8 * repetitions;
        let mut segments = Vec::with_capacity(pulses + 1);
        let mut sign = 1.0;
        segments.push(Segment {
            duration: 0.5 * interpulse,
            sign,
        });
        for _ in 1..pulses {
            sign = -sign;
            segments.push(Segment {
                duration: interpulse,
                sign,
            });
        }
        segments.push(Segment {
            duration: 0.5 * interpulse,
            sign: -sign,
        });
        Self::new(start, segments)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration()
    }
}

/// |γ_e| · Σ sign·∫ b over the pattern, by adaptive Gauss–Legendre panels
/// of the given order. Panels start at roughly one per period of the
/// field's highest frequency.
pub fn phase_quadrature(
    field: &StageField,
    pattern: &TogglingPattern,
    gamma_e_abs: f64,
    order: usize,
) -> Result<Estimate> {
    ensure_finite("gamma_e_abs", gamma_e_abs)?;
    if order == 0 {
        return Err(Error::domain("quadrature order must be positive"));
    }
    if field.b_max() == 0.0 {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let q = AdaptiveIntegrator::new(order);
    let f = |t: f64| field.eval(t);
    let mut value = 0.0;
    let mut error = 0.0;
    let mut t = pattern.start();
    for seg in pattern.segments() {
        let panels = ((seg.duration * field.bandwidth() / (2.0 * PI)).ceil() as usize).max(1);
        let tol = 1e-11 * field.b_max().abs() * seg.duration;
        let est = q.integrate(&f, t, t + seg.duration, panels, tol);
        value += seg.sign * est.value;
        error += est.error;
        t += seg.duration;
    }
    Ok(Estimate {
        value: gamma_e_abs * value,
        error: gamma_e_abs * error,
    })
}

/// Stage fields for an initial magnetization `m0`.
pub fn protocol_fields(p: &ProtocolParams, m0: &Magnetization) -> [StageField; 3] {
    let tm = &p.timing;
    [
        StageField::first_block(m0, p.omega, p.b_max),
        StageField::pulse(m0, p.omega, p.rabi, p.axis_phase, tm.tau, p.b_max),
        StageField::correlation(m0, p.omega, p.rabi, p.axis_phase, tm.tau, tm.t_p, p.b_max),
    ]
}

/// Integration windows of φ₁…φ₄; `None` for windows of zero length.
pub fn protocol_windows(p: &ProtocolParams) -> Result<[Option<TogglingPattern>; 4]> {
    let tm = &p.timing;
    let nonempty = |start: f64, d: f64, make: &dyn Fn(f64, f64) -> Result<TogglingPattern>| {
        if d > 0.0 {
            make(start, d).map(Some)
        } else {
            Ok(None)
        }
    };
    let t2 = tm.t2();
    Ok([
        nonempty(0.0, tm.tau, &TogglingPattern::echo)?,
        nonempty(tm.t1(), tm.t_p, &TogglingPattern::single)?,
        nonempty(t2, tm.tau_corr, &TogglingPattern::single)?,
        nonempty(t2 + tm.tau_corr, tm.tau, &TogglingPattern::echo)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseEstimate {
    pub phases: PhaseSet,
    /// Absolute error estimate per phase.
    pub errors: [f64; 4],
}

/// φ₁…φ₄ for one initial magnetization by quadrature.
pub fn phases_quadrature(p: &ProtocolParams, m0: &Magnetization, order: usize) -> Result<PhaseEstimate> {
    let fields = protocol_fields(p, m0);
    let windows = protocol_windows(p)?;
    let field_of = [0, 1, 2, 2];
    let mut values = [0.0; 4];
    let mut errors = [0.0; 4];
    for i in 0..4 {
        if let Some(w) = &windows[i] {
            let est = phase_quadrature(&fields[field_of[i]], w, p.gamma_e_abs, order)?;
            values[i] = est.value;
            errors[i] = est.error;
        }
    }
    Ok(PhaseEstimate {
        phases: PhaseSet::from_array(values),
        errors,
    })
}

/// Phases are linear in M₀, so they are fixed by their values on the
/// Cartesian basis: φᵢ(M₀) = cᵢ · M₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseBasis {
    coefficients: [[f64; 3]; 4],
    errors: [f64; 4],
}

impl PhaseBasis {
    pub fn quadrature(p: &ProtocolParams, order: usize) -> Result<Self> {
        let mut coefficients = [[0.0; 3]; 4];
        let mut errors = [0.0; 4];
        for (j, m) in Magnetization::basis().iter().enumerate() {
            let est = phases_quadrature(p, m, order)?;
            for i in 0..4 {
                coefficients[i][j] = est.phases.to_array()[i];
                errors[i] += est.errors[i];
            }
        }
        Ok(PhaseBasis { coefficients, errors })
    }

    /// Basis from per-axis phase sets (x̂, ŷ, ẑ).
    pub fn from_axis_phases(axes: [PhaseSet; 3], errors: [f64; 4]) -> Self {
        let mut coefficients = [[0.0; 3]; 4];
        for (j, ph) in axes.iter().enumerate() {
            for (i, v) in ph.to_array().into_iter().enumerate() {
                coefficients[i][j] = v;
            }
        }
        PhaseBasis { coefficients, errors }
    }

    pub fn coefficients(&self) -> &[[f64; 3]; 4] {
        &self.coefficients
    }

    /// Error bound per phase for any unit M₀.
    pub fn errors(&self) -> [f64; 4] {
        self.errors
    }

    pub fn phases_for(&self, m: &Vector3<f64>) -> PhaseSet {
        let c = &self.coefficients;
        PhaseSet::from_array([0, 1, 2, 3].map(|i| c[i][0] * m.x + c[i][1] * m.y + c[i][2] * m.z))
    }

    pub fn phases(&self, angles: EnsembleAngles) -> PhaseSet {
        self.phases_for(Magnetization::from_angles(angles).vector())
    }

    pub fn norm(&self, i: usize) -> f64 {
        Vector3::from(self.coefficients[i]).norm()
    }
}

fn ensure_denominators(p: &ProtocolParams) -> Result<()> {
    let (w, o) = (p.omega, p.rabi);
    if (w - o).abs() < SINGULAR_REL_TOL * w {
        return Err(Error::SingularDenominator {
            term: "phi2",
            denominator: "omega - rabi",
            value: w - o,
        });
    }
    if (w + o).abs() < SINGULAR_REL_TOL * w {
        return Err(Error::SingularDenominator {
            term: "phi2",
            denominator: "omega + rabi",
            value: w + o,
        });
    }
    Ok(())
}

/// φ₁ for arbitrary τ.
pub fn phi1_analytic(p: &ProtocolParams, a: EnsembleAngles) -> f64 {
    let wt = p.omega * p.timing.tau;
    4.0 * p.b_max * p.gamma_e_abs / p.omega * (0.5 * wt).sin().powi(2) * a.alpha.sin() * (wt + a.beta).sin()
}

/// The bracket of the general φ₂ closed form, split into its sin α part and
/// its cos α part (neither carrying a coupling factor).
fn phi2_bracket(p: &ProtocolParams, a: EnsembleAngles) -> Result<(f64, f64)> {
    ensure_denominators(p)?;
    let (sa, ca) = a.alpha.sin_cos();
    let b = a.beta;
    let phi = p.axis_phase;
    let w = p.omega;
    let o = p.rabi;
    let tau = p.timing.tau;
    let tp = p.timing.t_p;
    let sin_part = 2.0 * (b - 2.0 * phi - 0.5 * tp * w).cos() * sa * (0.5 * tp * w).sin() / w
        + 2.0 * (b + 0.5 * tp * w + 4.0 * tau * w).cos() * sa * (0.5 * tp * w).sin() / w
        + sa * (b - phi + 2.0 * tau * w).sin() / (w - o)
            * ((phi + (tp + 2.0 * tau) * (w - o)).cos() - (phi + 2.0 * tau * w - 2.0 * tau * o).cos())
        + sa * (b - phi + 2.0 * tau * w).sin() / (w + o)
            * (-(phi + 2.0 * tau * (w + o)).cos() + (phi + (tp + 2.0 * tau) * (w + o)).cos());
    let cos_part = ca / ((w - o) * (w + o))
        * ((w + o) * (phi + (tp + 2.0 * tau) * (w - o)).sin() - (w + o) * (phi + 2.0 * tau * w - 2.0 * tau * o).sin()
            + (w - o) * ((phi + 2.0 * tau * (w + o)).sin() - (phi + (tp + 2.0 * tau) * (w + o)).sin()));
    Ok((sin_part, cos_part))
}

/// General φ₂ exactly as transcribed in the reference closed form: the
/// coupling |γ_e| multiplies only the cos α term.
pub fn phi2_analytic(p: &ProtocolParams, a: EnsembleAngles) -> Result<f64> {
    let (s, c) = phi2_bracket(p, a)?;
    Ok(0.5 * p.b_max * (s + p.gamma_e_abs * c))
}

/// General φ₂ with |γ_e| applied to every term.
pub fn phi2_analytic_uniform(p: &ProtocolParams, a: EnsembleAngles) -> Result<f64> {
    let (s, c) = phi2_bracket(p, a)?;
    Ok(0.5 * p.b_max * p.gamma_e_abs * (s + c))
}

/// φ₂ with uniform coupling; falls back to quadrature when a closed-form
/// denominator is (nearly) singular.
pub fn phi2(p: &ProtocolParams, a: EnsembleAngles) -> Result<f64> {
    match phi2_analytic_uniform(p, a) {
        Err(Error::SingularDenominator { .. }) => {
            let m0 = Magnetization::from_angles(a);
            let fields = protocol_fields(p, &m0);
            match &protocol_windows(p)?[1] {
                Some(w) => Ok(phase_quadrature(&fields[1], w, p.gamma_e_abs, DEFAULT_PHASE_ORDER)?.value),
                None => Ok(0.0),
            }
        }
        other => other,
    }
}

/// General φ₃.
pub fn phi3_analytic(p: &ProtocolParams, a: EnsembleAngles) -> f64 {
    let (sa, ca) = a.alpha.sin_cos();
    let b = a.beta;
    let phi = p.axis_phase;
    let w = p.omega;
    let tau = p.timing.tau;
    let tp = p.timing.t_p;
    let tc = p.timing.tau_corr;
    let half = 0.5 * p.rabi * tp;
    p.b_max * p.gamma_e_abs / w
        * (half.cos().powi(2)
            * sa
            * (-(b + 2.0 * tp * w + 4.0 * tau * w).sin() + (b + (2.0 * tp + 4.0 * tau + tc) * w).sin())
            + 2.0 * (b - 2.0 * phi - 0.5 * (4.0 * tp + tc) * w).cos() * sa * (0.5 * tc * w).sin() * half.sin().powi(2)
            + ca * ((phi + 2.0 * (tp + tau) * w).cos() - (phi + (2.0 * (tp + tau) + tc) * w).cos())
                * (tp * p.rabi).sin())
}

/// General φ₄.
pub fn phi4_analytic(p: &ProtocolParams, a: EnsembleAngles) -> f64 {
    let (sa, ca) = a.alpha.sin_cos();
    let b = a.beta;
    let phi = p.axis_phase;
    let w = p.omega;
    let tau = p.timing.tau;
    let tp = p.timing.t_p;
    let tc = p.timing.tau_corr;
    let half = 0.5 * p.rabi * tp;
    let base = 2.0 * tp + tc;
    p.b_max * p.gamma_e_abs / w
        * (-half.cos().powi(2)
            * sa
            * ((b + (base + 4.0 * tau) * w).sin() - 2.0 * (b + (base + 5.0 * tau) * w).sin()
                + (b + (base + 6.0 * tau) * w).sin())
            + sa * half.sin().powi(2)
                * ((b - 2.0 * phi - base * w).sin() - 2.0 * (b - 2.0 * phi - (base + tau) * w).sin()
                    + (b - 2.0 * phi - (base + 2.0 * tau) * w).sin())
            + ca * (tp * p.rabi).sin()
                * (-2.0 * (phi + (base + 3.0 * tau) * w).cos()
                    + (phi + (base + 4.0 * tau) * w).cos()
                    + (phi + (base + 2.0 * tau) * w).cos()))
}

/// Resonant φ₂ exactly as transcribed (2τ written as 2π/ω), with the
/// reference coupling pattern: |γ_e| on the cos α term only.
pub fn phi2_resonant_transcribed(p: &ProtocolParams, a: EnsembleAngles) -> Result<f64> {
    let (s, c) = phi2_resonant_bracket(p, a)?;
    Ok(0.5 * p.b_max * (s + p.gamma_e_abs * c))
}

fn phi2_resonant_bracket(p: &ProtocolParams, a: EnsembleAngles) -> Result<(f64, f64)> {
    ensure_denominators(p)?;
    let (sa, ca) = a.alpha.sin_cos();
    let b = a.beta;
    let phi = p.axis_phase;
    let w = p.omega;
    let o = p.rabi;
    let tp = p.timing.t_p;
    let two_pi_w = 2.0 * PI / w;
    let sin_part = ((phi + (tp + two_pi_w) * (w - o)).cos() - (phi - 2.0 * PI * o / w).cos()) * sa * (b - phi).sin()
        / (w - o)
        + (-(phi + 2.0 * PI * o / w).cos() + (phi + (tp + two_pi_w) * (w + o)).cos()) * sa * (b - phi).sin() / (w + o)
        + 2.0 * (b - 2.0 * phi - 0.5 * tp * w).cos() * sa * (0.5 * tp * w).sin() / w
        + 2.0 * (b + 0.5 * tp * w).cos() * sa * (0.5 * tp * w).sin() / w;
    let cos_part = ca / ((w - o) * (w + o))
        * ((w + o) * (phi + (tp + two_pi_w) * (w - o)).sin() - (w + o) * (phi - 2.0 * PI * o / w).sin()
            + (w - o) * ((phi + 2.0 * PI * o / w).sin() - (phi + (tp + two_pi_w) * (w + o)).sin()));
    Ok((sin_part, cos_part))
}

/// Resonant (ωτ = π) phases. φ₂ carries |γ_e| on every term; see
/// [`phi2_resonant_transcribed`] for the reference variant.
pub fn phases_resonant(p: &ProtocolParams, a: EnsembleAngles) -> Result<PhaseSet> {
    p.timing.ensure_resonant(p.omega)?;
    let (sa, ca) = a.alpha.sin_cos();
    let b = a.beta;
    let phi = p.axis_phase;
    let w = p.omega;
    let tp = p.timing.t_p;
    let tc = p.timing.tau_corr;
    let half = 0.5 * p.rabi * tp;
    let (c2, s2) = (half.cos().powi(2), half.sin().powi(2));
    let sr = (tp * p.rabi).sin();
    let scale = p.b_max * p.gamma_e_abs / w;

    let phi1 = -4.0 * scale * sa * b.sin();
    let phi2 = match phi2_resonant_bracket(p, a) {
        Ok((s, c)) => 0.5 * p.b_max * p.gamma_e_abs * (s + c),
        Err(Error::SingularDenominator { .. }) => phi2(p, a)?,
        Err(e) => return Err(e),
    };
    let phi3 = 2.0
        * scale
        * (0.5 * tc * w).sin()
        * ((b + 2.0 * tp * w + 0.5 * tc * w).cos() * c2 * sa
            + (b - 2.0 * phi - 0.5 * (4.0 * tp + tc) * w).cos() * sa * s2
            + ca * (phi + 2.0 * tp * w + 0.5 * tc * w).sin() * sr);
    let phi4 = 4.0
        * scale
        * (-c2 * sa * (b + 2.0 * tp * w + tc * w).sin()
            + sa * s2 * (b - 2.0 * phi - (2.0 * tp + tc) * w).sin()
            + ca * (phi + 2.0 * tp * w + tc * w).cos() * sr);
    Ok(PhaseSet::new(phi1, phi2, phi3, phi4))
}
