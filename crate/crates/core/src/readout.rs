//! Single-NV readout and the orientation-averaged ensemble signal.
//!
//! The ensemble average is taken over the initial-magnetization angles with
//! the measure (1/4π) dα dβ on [0, π] × [0, 2π), uniform in α rather than
//! solid-angle weighted. The closed form of [`ensemble_average_closed`]
//! holds only under this measure.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{EnsembleAngles, PhysicalConstants, RfDrive, SequenceTiming};
use crate::phases::{PhaseBasis, PhaseSet, DEFAULT_PHASE_ORDER};
use crate::protocol::ProtocolParams;
use crate::quadrature::{pairwise_sum, GaussLegendre};
use crate::rotations::effective_axis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadoutSignal {
    pub value: f64,
    /// Set when a small-angle value leaves [−1, 1].
    pub out_of_range: bool,
}

impl ReadoutSignal {
    fn new(value: f64) -> Self {
        ReadoutSignal {
            value,
            out_of_range: value.abs() > 1.0,
        }
    }
}

/// ⟨σ_z⟩ = cos φ₁ cos φ₄ sin(φ₃ + φ₂) − sin φ₁ sin φ₄.
pub fn sigma_z_exact(p: &PhaseSet) -> ReadoutSignal {
    ReadoutSignal::new(p.phi1.cos() * p.phi4.cos() * (p.phi3 + p.phi2).sin() - p.phi1.sin() * p.phi4.sin())
}

/// ⟨σ_z⟩ ≈ φ₃ + φ₂ − φ₁ φ₄.
pub fn sigma_z_small_angle(p: &PhaseSet) -> ReadoutSignal {
    ReadoutSignal::new(p.phi3 + p.phi2 - p.phi1 * p.phi4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AveragingMethod {
    Quadrature,
    ClosedForm,
    MonteCarlo,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSignal {
    pub value: f64,
    /// K = 2π B_max² γ_e² / ω².
    pub prefactor: f64,
    pub method: AveragingMethod,
    /// Absolute error estimate (standard error for Monte-Carlo).
    pub error: f64,
}

/// Product grid over (α, β): Gauss–Legendre in α, periodic trapezoid in β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EnsembleGrid {
    pub n_alpha: usize,
    pub n_beta: usize,
}

impl Default for EnsembleGrid {
    fn default() -> Self {
        EnsembleGrid {
            n_alpha: 24,
            n_beta: 16,
        }
    }
}

impl EnsembleGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_alpha < 2 || self.n_beta < 5 {
            return Err(Error::domain(format!(
                "ensemble grid needs n_alpha >= 2 and n_beta >= 5, got {} x {}",
                self.n_alpha, self.n_beta
            )));
        }
        Ok(())
    }

    pub fn halved(&self) -> Self {
        EnsembleGrid {
            n_alpha: (self.n_alpha / 2).max(2),
            n_beta: (self.n_beta / 2).max(5),
        }
    }

    /// Grid nodes with weights already including the 1/4π normalisation,
    /// in a fixed order.
    pub fn nodes(&self) -> Vec<(EnsembleAngles, f64)> {
        let gl = GaussLegendre::new(self.n_alpha);
        let db = TAU / self.n_beta as f64;
        let mut out = Vec::with_capacity(self.n_alpha * self.n_beta);
        for (alpha, wa) in gl.mapped(0.0, PI) {
            for k in 0..self.n_beta {
                let angles = EnsembleAngles {
                    alpha,
                    beta: db * k as f64,
                };
                out.push((angles, wa * db / (4.0 * PI)));
            }
        }
        out
    }

    /// (1/4π) ∫∫ f dα dβ on this grid, summed pairwise.
    pub fn average<F: Fn(EnsembleAngles) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self.nodes().into_iter().map(|(a, w)| w * f(a)).collect();
        pairwise_sum(&terms)
    }

    /// Average on this grid and on the halved grid; the error estimate is
    /// their difference.
    pub fn average_with_error<F: Fn(EnsembleAngles) -> f64>(&self, f: F) -> (f64, f64) {
        let fine = self.average(&f);
        let coarse = self.halved().average(&f);
        (fine, (fine - coarse).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EnsembleResolution {
    pub phase_order: usize,
    pub grid: EnsembleGrid,
}

impl Default for EnsembleResolution {
    fn default() -> Self {
        EnsembleResolution {
            phase_order: DEFAULT_PHASE_ORDER,
            grid: EnsembleGrid::default(),
        }
    }
}

/// Bound on the change of φ₃ + φ₂ − φ₁ φ₄ caused by phase errors.
fn propagated_phase_error(basis: &PhaseBasis) -> f64 {
    let e = basis.errors();
    e[1] + e[2] + basis.norm(0) * e[3] + basis.norm(3) * e[0] + e[0] * e[3]
}

/// Orientation average of φ₃ + φ₂ − φ₁ φ₄ with phases from quadrature of
/// the stage fields.
pub fn ensemble_average_quadrature(p: &ProtocolParams, resolution: EnsembleResolution) -> Result<EnsembleSignal> {
    resolution.grid.validate()?;
    let basis = PhaseBasis::quadrature(p, resolution.phase_order)?;
    let (value, grid_error) = resolution
        .grid
        .average_with_error(|a| sigma_z_small_angle(&basis.phases(a)).value);
    Ok(EnsembleSignal {
        value,
        prefactor: p.prefactor(),
        method: AveragingMethod::Quadrature,
        error: grid_error + propagated_phase_error(&basis),
    })
}

/// Orientation average of the exact readout, phases from quadrature.
pub fn ensemble_average_exact_readout(p: &ProtocolParams, resolution: EnsembleResolution) -> Result<EnsembleSignal> {
    resolution.grid.validate()?;
    let basis = PhaseBasis::quadrature(p, resolution.phase_order)?;
    let (value, grid_error) = resolution
        .grid
        .average_with_error(|a| sigma_z_exact(&basis.phases(a)).value);
    Ok(EnsembleSignal {
        value,
        prefactor: p.prefactor(),
        method: AveragingMethod::Quadrature,
        error: grid_error + propagated_phase_error(&basis),
    })
}

/// Monte-Carlo estimate of the same average with uniform (α, β) draws.
pub fn ensemble_average_monte_carlo(
    p: &ProtocolParams,
    samples: usize,
    seed: u64,
    phase_order: usize,
) -> Result<EnsembleSignal> {
    if samples < 2 {
        return Err(Error::domain("Monte-Carlo averaging needs at least two samples"));
    }
    let basis = PhaseBasis::quadrature(p, phase_order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let a = EnsembleAngles {
                alpha: rng.random_range(0.0..=PI),
                beta: rng.random_range(0.0..TAU),
            };
            sigma_z_small_angle(&basis.phases(a)).value
        })
        .collect();
    let n = samples as f64;
    let mean = pairwise_sum(&values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    // Domain measure 2π² over the 4π normalisation.
    let scale = FRAC_PI_2;
    Ok(EnsembleSignal {
        value: scale * mean,
        prefactor: p.prefactor(),
        method: AveragingMethod::MonteCarlo,
        error: scale * (var / n).sqrt(),
    })
}

/// K [sin²(Ωt_p/2) cos(2φ + ω(2t_p + τ̃)) − cos²(Ωt_p/2) cos(ω(2t_p + τ̃))].
pub fn ensemble_closed_value(k: f64, rotation: f64, axis_phase: f64, correlation_phase: f64) -> f64 {
    let half = 0.5 * rotation;
    k * (half.sin().powi(2) * (2.0 * axis_phase + correlation_phase).cos()
        - half.cos().powi(2) * correlation_phase.cos())
}

pub fn ensemble_average_closed(p: &ProtocolParams) -> Result<EnsembleSignal> {
    p.timing.ensure_resonant(p.omega)?;
    let k = p.prefactor();
    Ok(EnsembleSignal {
        value: ensemble_closed_value(k, p.rotation_angle(), p.axis_phase, p.correlation_phase()),
        prefactor: k,
        method: AveragingMethod::ClosedForm,
        error: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecialPhase {
    Zero,
    QuarterPi,
    HalfPi,
}

impl SpecialPhase {
    pub fn from_phase(phi: f64) -> Option<Self> {
        const TOL: f64 = 1e-12;
        if phi.abs() <= TOL {
            Some(SpecialPhase::Zero)
        } else if (phi - FRAC_PI_4).abs() <= TOL {
            Some(SpecialPhase::QuarterPi)
        } else if (phi - FRAC_PI_2).abs() <= TOL {
            Some(SpecialPhase::HalfPi)
        } else {
            None
        }
    }

    pub fn phase(self) -> f64 {
        match self {
            SpecialPhase::Zero => 0.0,
            SpecialPhase::QuarterPi => FRAC_PI_4,
            SpecialPhase::HalfPi => FRAC_PI_2,
        }
    }

    /// The reference display formula for this phase, taken literally, with
    /// θ = Ωt_p and W = ω(2t_p + τ̃).
    pub fn displayed(self, k: f64, theta: f64, w: f64) -> f64 {
        match self {
            SpecialPhase::Zero => k * theta.cos() * w.cos(),
            SpecialPhase::HalfPi => k * w.cos(),
            SpecialPhase::QuarterPi => k * (theta.cos().powi(2) * w.cos() - theta.sin().powi(2) * w.sin()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecialCase {
    pub phase: SpecialPhase,
    /// General closed form evaluated at the special phase.
    pub general: EnsembleSignal,
    /// The displayed special-case formula at the same point.
    pub displayed: f64,
}

impl SpecialCase {
    pub fn difference(&self) -> f64 {
        self.displayed - self.general.value
    }
}

/// General closed form at φ ∈ {0, π/4, π/2} alongside the displayed
/// special-case formula for that phase.
pub fn special_case(phi: f64, p: &ProtocolParams) -> Result<SpecialCase> {
    let phase = SpecialPhase::from_phase(phi).ok_or_else(|| {
        Error::domain(format!(
            "special cases exist for phi_rf in {{0, pi/4, pi/2}}, got {phi}; use ensemble_average_closed"
        ))
    })?;
    let q = ProtocolParams {
        axis_phase: phase.phase(),
        ..*p
    };
    let general = ensemble_average_closed(&q)?;
    Ok(SpecialCase {
        phase,
        general,
        displayed: phase.displayed(q.prefactor(), q.rotation_angle(), q.correlation_phase()),
    })
}

/// Closed-form ensemble signal for a drive with both x̂ and ŷ components,
/// through φ → φ − atan2(Ω_y, Ω_x) and Ω → |(Ω_x, Ω_y)|.
pub fn misalignment_map(
    omega: f64,
    drive: &RfDrive,
    timing: SequenceTiming,
    b_max: f64,
    constants: &PhysicalConstants,
) -> Result<EnsembleSignal> {
    let axis = effective_axis(drive)?;
    drive.ensure_resonant(omega)?;
    let p = ProtocolParams::new(omega, drive.rabi(), axis.phase, timing, b_max, constants.gamma_e_abs())?;
    ensemble_average_closed(&p)
}

/// Fit of |exact − small-angle| ≈ C·max|φ|³ over random phase sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemainderFit {
    /// Least-squares C.
    pub fitted: f64,
    /// Largest pointwise ratio observed.
    pub worst: f64,
}

/// Draws `samples` phase sets uniform in [−bound, bound]⁴ and fits the
/// small-angle remainder against max|φ|³.
pub fn fitted_remainder_coefficient(samples: usize, bound: f64, seed: u64) -> RemainderFit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut num, mut den, mut worst) = (0.0, 0.0, 0.0f64);
    for _ in 0..samples {
        let p = PhaseSet::from_array(std::array::from_fn(|_| rng.random_range(-bound..=bound)));
        let d = (sigma_z_exact(&p).value - sigma_z_small_angle(&p).value).abs();
        let m3 = p.max_abs().powi(3);
        if m3 > 0.0 {
            num += d * m3;
            den += m3 * m3;
            worst = worst.max(d / m3);
        }
    }
    RemainderFit {
        fitted: if den > 0.0 { num / den } else { 0.0 },
        worst,
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const OMEGA: f64 = TAU * 1.33e6;

    fn constants() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn params(rabi: f64, phi: f64, t_p: f64, tc: f64, b_max: f64) -> ProtocolParams {
        let timing = SequenceTiming::resonant(OMEGA, t_p, tc).unwrap();
        ProtocolParams::new(OMEGA, rabi, phi, timing, b_max, constants().gamma_e_abs()).unwrap()
    }

    #[test]
    fn readout_examples() {
        assert_eq!(sigma_z_exact(&PhaseSet::default()).value, 0.0);
        let p = PhaseSet::new(FRAC_PI_2, 0.0, 0.0, FRAC_PI_2);
        assert!((sigma_z_exact(&p).value + 1.0).abs() < 1e-15);
        assert_eq!(sigma_z_small_angle(&PhaseSet::default()).value, 0.0);
        let p = PhaseSet::new(0.01, 0.0, 0.0, 0.02);
        assert!((sigma_z_small_angle(&p).value + 2e-4).abs() < 1e-18);
        assert!(sigma_z_small_angle(&PhaseSet::new(2.0, 0.0, 0.0, -2.0)).out_of_range);
    }

    #[test]
    fn closed_form_inversion_pair() {
        let t_p = 30e-6;
        let base = params(PI / t_p, 0.0, t_p, 0.0, 1e-7);
        // Choose τ̃ so that ω(2t_p + τ̃) is a multiple of 2π.
        let w = base.correlation_phase();
        let tc = (TAU * (w / TAU).ceil() - w) / OMEGA;
        let p = base.with_tau_corr(tc).unwrap();
        let k = p.prefactor();
        assert!((ensemble_average_closed(&p).unwrap().value - k).abs() < 1e-9 * k);
        let p0 = ProtocolParams { rabi: 0.0, ..p };
        assert!((ensemble_average_closed(&p0).unwrap().value + k).abs() < 1e-9 * k);
    }

    #[test]
    fn full_rabi_cycle_equals_no_pulse() {
        let t_p = 30e-6;
        let p = params(TAU / t_p, 0.7, t_p, 61e-6, 1e-7);
        let p0 = ProtocolParams { rabi: 0.0, ..p };
        let k = p.prefactor();
        assert!(
            (ensemble_average_closed(&p).unwrap().value - ensemble_average_closed(&p0).unwrap().value).abs()
                < 1e-12 * k
        );
    }

    #[test]
    fn special_case_catalogue() {
        let p = params(4e4, 0.0, 30e-6, 61.3e-6, 1e-7);
        let k = p.prefactor();
        let (theta, w) = (p.rotation_angle(), p.correlation_phase());
        let zero = special_case(0.0, &p).unwrap();
        assert!((zero.general.value + k * theta.cos() * w.cos()).abs() < 1e-12 * k);
        assert!((zero.displayed + zero.general.value).abs() < 1e-12 * k);
        let half = special_case(FRAC_PI_2, &p).unwrap();
        assert!((half.general.value + k * w.cos()).abs() < 1e-12 * k);
        let quarter = special_case(FRAC_PI_4, &p).unwrap();
        let (c2, s2) = ((0.5 * theta).cos().powi(2), (0.5 * theta).sin().powi(2));
        assert!((quarter.general.value - k * (-c2 * w.cos() - s2 * w.sin())).abs() < 1e-12 * k);
        assert!(special_case(0.3, &p).is_err());
    }

    #[test]
    fn misalignment_examples() {
        let timing = SequenceTiming::resonant(OMEGA, 30e-6, 61e-6).unwrap();
        let c = constants();
        let aligned = RfDrive::aligned(5e4, OMEGA, 0.4).unwrap();
        let p = ProtocolParams::from_drive(OMEGA, &aligned, timing, 1e-7, &c).unwrap();
        let m = misalignment_map(OMEGA, &aligned, timing, 1e-7, &c).unwrap();
        assert_eq!(m.value, ensemble_average_closed(&p).unwrap().value);

        let r = 5e4;
        let skew = RfDrive::misaligned(r, r, OMEGA, FRAC_PI_4).unwrap();
        let straight = RfDrive::aligned(r * 2f64.sqrt(), OMEGA, 0.0).unwrap();
        let a = misalignment_map(OMEGA, &skew, timing, 1e-7, &c).unwrap();
        let b = misalignment_map(OMEGA, &straight, timing, 1e-7, &c).unwrap();
        assert!((a.value - b.value).abs() < 1e-12 * a.prefactor);

        let none = RfDrive::misaligned(0.0, 0.0, OMEGA, 0.0).unwrap();
        assert!(matches!(
            misalignment_map(OMEGA, &none, timing, 1e-7, &c),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn no_pulse_quadrature_is_phase_independent() {
        let a =
            ensemble_average_quadrature(&params(0.0, 0.0, 30e-6, 61e-6, 1e-7), EnsembleResolution::default()).unwrap();
        let b =
            ensemble_average_quadrature(&params(0.0, 1.3, 30e-6, 61e-6, 1e-7), EnsembleResolution::default()).unwrap();
        assert!((a.value - b.value).abs() < 1e-12 * a.prefactor);
        let p = params(0.0, 0.0, 30e-6, 61e-6, 1e-7);
        let expect = -p.prefactor() * p.correlation_phase().cos();
        assert!((a.value - expect).abs() < 5e-7 * p.prefactor());
    }

    #[test]
    fn monte_carlo_agrees_within_standard_errors() {
        let p = params(6e4, 0.5, 20e-6, 61e-6, 1e-7);
        let mc = ensemble_average_monte_carlo(&p, 20_000, 7, 16).unwrap();
        let cf = ensemble_average_closed(&p).unwrap();
        assert!((mc.value - cf.value).abs() < 5.0 * mc.error, "{mc:?} vs {cf:?}");
        let again = ensemble_average_monte_carlo(&p, 20_000, 7, 16).unwrap();
        assert_eq!(mc.value, again.value);
    }

    #[test]
    fn fitted_remainder_coefficient_below_one() {
        let c = fitted_remainder_coefficient(1000, 0.1, 11);
        assert!(c.fitted <= 1.0, "{c:?}");
        assert!(c.worst > 1.0 && c.worst <= 10.0 / 3.0 + 0.1, "{c:?}");
    }

    #[test]
    fn phi2_and_phi3_average_to_zero() {
        let p = params(6e4, 0.5, 20e-6, 61e-6, 1e-7);
        let basis = PhaseBasis::quadrature(&p, 16).unwrap();
        let g = EnsembleGrid::default();
        let s = p.phase_scale();
        assert!(g.average(|a| basis.phases(a).phi2).abs() < 1e-12 * s);
        assert!(g.average(|a| basis.phases(a).phi3).abs() < 1e-12 * s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        // Third-order remainder x³/6 + (φ₁² + φ₄²)x/2 with x = φ₂ + φ₃
        // peaks at (10/3) max|φ|³.
        #[test]
        fn small_angle_remainder_is_cubic(ph in proptest::array::uniform4(-0.1..0.1f64)) {
            let p = PhaseSet::from_array(ph);
            let d = (sigma_z_exact(&p).value - sigma_z_small_angle(&p).value).abs();
            let m = p.max_abs();
            prop_assert!(d <= 10.0 / 3.0 * m.powi(3) + m.powi(4));
        }

        #[test]
        fn exact_readout_bounded(ph in proptest::array::uniform4(-10.0..10.0f64)) {
            prop_assert!(sigma_z_exact(&PhaseSet::from_array(ph)).value.abs() <= 1.0);
        }

        #[test]
        fn closed_form_is_pi_periodic_in_phase(rabi in 0.0..2e5f64, phi in -PI..PI, tc in 0.0..70e-6f64) {
            let p = params(rabi, phi, 30e-6, tc, 1e-7);
            let q = ProtocolParams { axis_phase: phi + PI, ..p };
            let k = p.prefactor();
            let a = ensemble_average_closed(&p).unwrap().value;
            prop_assert!((a - ensemble_average_closed(&q).unwrap().value).abs() < 1e-12 * k);
            prop_assert!(a.abs() <= 2.0 * k);
        }

        #[test]
        fn half_pi_is_rabi_independent(rabi in 0.0..2e5f64, tc in 0.0..70e-6f64) {
            let p = params(rabi, FRAC_PI_2, 30e-6, tc, 1e-7);
            let p0 = ProtocolParams { rabi: 0.0, ..p };
            let d = ensemble_average_closed(&p).unwrap().value - ensemble_average_closed(&p0).unwrap().value;
            prop_assert!(d.abs() <= 1e-9 * p.prefactor());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn quadrature_matches_closed_form(rabi in 0.0..2e5f64, phi in -PI..PI, t_p in 0.0..40e-6f64, tc in 0.0..70e-6f64) {
            let p = params(rabi, phi, t_p, tc, 1e-7);
            let q = ensemble_average_quadrature(&p, EnsembleResolution::default()).unwrap();
            let c = ensemble_average_closed(&p).unwrap();
            prop_assert!((q.value - c.value).abs() <= 5e-7 * c.prefactor);
            prop_assert!((q.value - c.value).abs() <= q.error + 1e-12 * c.prefactor);
        }
    }
}
