//! Reconciliation suite: every reference closed form is diffed against the
//! canonical numerical result, and each diff is compared with its
//! catalogued expectation. The suite passes iff every observed diff
//! matches what is catalogued, including the known discrepancies.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fmt;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::experiment::config::ExperimentConfig;
use crate::experiment::sweep::SweepResult;
use crate::field::{expanded, field_stage1, field_stage2, field_stage3, hemisphere_integral};
use crate::model::{
    larmor_frequency, EnsembleAngles, Magnetization, NvSample, PhysicalConstants, RfDrive, SequenceTiming,
};
use crate::oracle::bloch::rwa_deviation;
use crate::phases::{
    phases_quadrature, phases_resonant, phi1_analytic, phi2_analytic, phi2_analytic_uniform, phi2_resonant_transcribed,
    phi3_analytic, phi4_analytic, PhaseSet, DEFAULT_PHASE_ORDER,
};
use crate::protocol::ProtocolParams;
use crate::readout::{
    ensemble_average_closed, ensemble_average_exact_readout, ensemble_average_quadrature, ensemble_closed_value,
    special_case, EnsembleResolution, SpecialPhase,
};

/// Interpulse delay used in the reference measurement, s.
pub const REFERENCE_DELAY: f64 = 188.1e-9;
/// Larmor frequency used for the randomised checks, rad/s.
pub const CHECK_OMEGA: f64 = TAU * 1.33e6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconciliationEntry {
    pub id: String,
    pub description: String,
    /// What the diff is catalogued to look like.
    pub expectation: String,
    pub observed: f64,
    pub threshold: f64,
    pub matches: bool,
    pub details: BTreeMap<String, f64>,
    /// Terms that disagreed with the canonical result.
    pub offending: Vec<String>,
}

impl ReconciliationEntry {
    fn new(id: &str, description: &str, expectation: &str) -> Self {
        ReconciliationEntry {
            id: id.to_string(),
            description: description.to_string(),
            expectation: expectation.to_string(),
            observed: 0.0,
            threshold: 0.0,
            matches: false,
            details: BTreeMap::new(),
            offending: Vec::new(),
        }
    }

    fn detail(mut self, key: &str, v: f64) -> Self {
        self.details.insert(key.to_string(), v);
        self
    }

    fn verdict(mut self, observed: f64, threshold: f64, matches: bool) -> Self {
        self.observed = observed;
        self.threshold = threshold;
        self.matches = matches;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconciliationReport {
    pub entries: Vec<ReconciliationEntry>,
    pub passed: bool,
}

impl ReconciliationReport {
    pub fn from_entries(entries: Vec<ReconciliationEntry>) -> Self {
        let passed = entries.iter().all(|e| e.matches);
        ReconciliationReport { entries, passed }
    }

    pub fn get(&self, id: &str) -> Option<&ReconciliationEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

impl fmt::Display for ReconciliationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{:<4} {:<26} observed {:>11.4e}  threshold {:>10.3e}  {}",
                if e.matches { "ok" } else { "FAIL" },
                e.id,
                e.observed,
                e.threshold,
                e.description
            )?;
            if !e.offending.is_empty() {
                writeln!(f, "     offending: {}", e.offending.join(", "))?;
            }
        }
        write!(f, "{}", if self.passed { "suite passed" } else { "suite FAILED" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationSettings {
    pub phase_draws: usize,
    pub ensemble_draws: usize,
    pub seed: u64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        ValidationSettings {
            phase_draws: 1000,
            ensemble_draws: 200,
            seed: 0,
        }
    }
}

/// Relative tolerance of closed-form phases against quadrature, measured
/// against B_max|γ_e|/ω.
pub const PHASE_REL_TOL: f64 = 1e-7;
/// Tolerance of the ensemble closed form against quadrature, in units of K.
pub const ENSEMBLE_TOL: f64 = 5e-7;

fn b_max_for(scale: f64, omega: f64, constants: &PhysicalConstants) -> f64 {
    scale * omega / constants.gamma_e_abs()
}

/// One random protocol draw. `resonant` fixes ωτ = π.
pub fn random_params(rng: &mut impl Rng, resonant: bool) -> ProtocolParams {
    let constants = PhysicalConstants::default();
    let omega = CHECK_OMEGA;
    let tau = if resonant {
        PI / omega
    } else {
        rng.random_range(2e-8..2e-6)
    };
    let t_p = rng.random_range(0.0..20e-6);
    let tau_corr = rng.random_range(0.0..10e-6);
    let timing = SequenceTiming::new(tau, t_p, tau_corr).expect("drawn timing is valid");
    ProtocolParams::new(
        omega,
        rng.random_range(0.0..0.05 * omega),
        rng.random_range(-PI..PI),
        timing,
        b_max_for(1e-3, omega, &constants),
        constants.gamma_e_abs(),
    )
    .expect("drawn parameters are valid")
}

pub fn random_angles(rng: &mut impl Rng) -> EnsembleAngles {
    EnsembleAngles {
        alpha: rng.random_range(0.0..=PI),
        beta: rng.random_range(0.0..TAU),
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct MaxErr([f64; 4]);

impl MaxErr {
    fn add(&mut self, a: PhaseSet, b: PhaseSet, scale: f64) {
        for (m, (x, y)) in self.0.iter_mut().zip(a.to_array().iter().zip(b.to_array())) {
            *m = m.max((x - y).abs() / scale);
        }
    }
}

fn phase_entry(id: &str, description: &str, err: MaxErr, phi2_err: f64) -> ReconciliationEntry {
    let checked = [err.0[0], err.0[2], err.0[3]];
    let observed = checked.iter().cloned().fold(0.0, f64::max);
    let mut e = ReconciliationEntry::new(
        id,
        description,
        "phi1, phi3, phi4 agree with quadrature within 1e-7 of B_max|gamma_e|/omega",
    )
    .detail("phi1_max_rel", err.0[0])
    .detail("phi2_uniform_max_rel", phi2_err)
    .detail("phi3_max_rel", err.0[2])
    .detail("phi4_max_rel", err.0[3]);
    for (name, v) in [("phi1", err.0[0]), ("phi3", err.0[2]), ("phi4", err.0[3])] {
        if v.is_nan() || v > PHASE_REL_TOL {
            e.offending.push(name.to_string());
        }
    }
    let ok = e.offending.is_empty();
    e.verdict(observed, PHASE_REL_TOL, ok)
}

/// General closed forms at arbitrary τ against quadrature.
pub fn check_general_phases(draws: usize, rng: &mut impl Rng) -> Result<ReconciliationEntry> {
    let mut err = MaxErr::default();
    let mut phi2_err = 0.0f64;
    for _ in 0..draws {
        let p = random_params(rng, false);
        let a = random_angles(rng);
        let q = phases_quadrature(&p, &Magnetization::from_angles(a), DEFAULT_PHASE_ORDER)?.phases;
        let s = PhaseSet::new(
            phi1_analytic(&p, a),
            phi2_analytic_uniform(&p, a)?,
            phi3_analytic(&p, a),
            phi4_analytic(&p, a),
        );
        err.add(s, q, p.phase_scale());
        phi2_err = phi2_err.max((s.phi2 - q.phi2).abs() / p.phase_scale());
    }
    Ok(phase_entry(
        "phases.general",
        "general closed-form phases vs quadrature",
        err,
        phi2_err,
    )
    .detail("draws", draws as f64))
}

/// Resonant closed forms against quadrature.
pub fn check_resonant_phases(draws: usize, rng: &mut impl Rng) -> Result<ReconciliationEntry> {
    let mut err = MaxErr::default();
    for _ in 0..draws {
        let p = random_params(rng, true);
        let a = random_angles(rng);
        let q = phases_quadrature(&p, &Magnetization::from_angles(a), DEFAULT_PHASE_ORDER)?.phases;
        err.add(phases_resonant(&p, a)?, q, p.phase_scale());
    }
    let phi2_err = err.0[1];
    Ok(phase_entry(
        "phases.resonant",
        "resonant closed-form phases vs quadrature",
        err,
        phi2_err,
    )
    .detail("draws", draws as f64))
}

/// The transcribed φ₂ carries |γ_e| only on its cos α term. At α = π/2 only
/// the sin α part survives, so quadrature / transcription = |γ_e| exactly;
/// with |γ_e| on every term the form agrees with quadrature.
pub fn check_phi2_coupling(draws: usize, rng: &mut impl Rng) -> Result<ReconciliationEntry> {
    let mut ratio_err = 0.0f64;
    let mut ratio_sum = 0.0;
    let mut n = 0usize;
    let mut transcribed_err = 0.0f64;
    let mut gamma = 0.0;
    for i in 0..draws {
        let resonant = i % 2 == 1;
        let mut p = random_params(rng, resonant);
        p.rabi = p.rabi.max(1e-3 * p.omega);
        let a = EnsembleAngles {
            alpha: FRAC_PI_2,
            beta: rng.random_range(0.0..TAU),
        };
        gamma = p.gamma_e_abs;
        let transcribed = |a: EnsembleAngles| {
            if resonant {
                phi2_resonant_transcribed(&p, a)
            } else {
                phi2_analytic(&p, a)
            }
        };
        let quad = |a: EnsembleAngles| -> Result<f64> {
            Ok(
                phases_quadrature(&p, &Magnetization::from_angles(a), DEFAULT_PHASE_ORDER)?
                    .phases
                    .phi2,
            )
        };
        // cos(π/2) is 6e-17 in floating point, which |γ_e| would amplify;
        // remove the cos α part (β-independent, read off at α = 0) exactly.
        let top = EnsembleAngles {
            alpha: 0.0,
            beta: a.beta,
        };
        let ca = a.alpha.cos();
        let q = quad(a)? - ca * quad(top)?;
        let t = transcribed(a)? - ca * transcribed(top)?;
        // Skip draws where the sin α part nearly cancels.
        if q.abs() > 1e-3 * p.phase_scale() {
            let r = q / t;
            ratio_err = ratio_err.max((r / gamma - 1.0).abs());
            ratio_sum += r;
            n += 1;
        }
        let generic = random_angles(rng);
        let qg = quad(generic)?;
        let tg = transcribed(generic)?;
        transcribed_err = transcribed_err.max((tg - qg).abs() / p.phase_scale());
    }
    let mean_ratio = if n > 0 { ratio_sum / n as f64 } else { f64::NAN };
    let mut e = ReconciliationEntry::new(
        "phi2.coupling",
        "transcribed phi2 vs quadrature (coupling factor only on the cos(alpha) term)",
        "quadrature / transcribed phi2 at alpha = pi/2 equals |gamma_e| within 1e-6 relative",
    )
    .detail("gamma_e_abs", gamma)
    .detail("mean_ratio", mean_ratio)
    .detail("transcribed_max_rel", transcribed_err)
    .detail("draws_used", n as f64);
    e.offending.push("phi2 sin(alpha) terms lack |gamma_e|".to_string());
    let ok = n > 0 && ratio_err <= 1e-6;
    Ok(e.verdict(ratio_err, 1e-6, ok))
}

/// Closed-form ensemble signal against the quadrature average.
pub fn check_ensemble(draws: usize, rng: &mut impl Rng) -> Result<ReconciliationEntry> {
    let mut worst = 0.0f64;
    let mut worst_error_bar = 0.0f64;
    for _ in 0..draws {
        let p = random_params(rng, true);
        let q = ensemble_average_quadrature(&p, EnsembleResolution::default())?;
        let c = ensemble_average_closed(&p)?;
        worst = worst.max((q.value - c.value).abs() / c.prefactor);
        worst_error_bar = worst_error_bar.max(q.error / c.prefactor);
    }
    Ok(ReconciliationEntry::new(
        "ensemble.closed_form",
        "ensemble closed form vs orientation-averaged quadrature",
        "agreement within 5e-7 K",
    )
    .detail("draws", draws as f64)
    .detail("max_quadrature_error_over_k", worst_error_bar)
    .verdict(worst, ENSEMBLE_TOL, worst <= ENSEMBLE_TOL))
}

/// The display expected from the catalogued quarter-phase structure: the
/// general form's cos W and sin W coefficients evaluated at twice the pulse
/// area, with the cos W coefficient negated.
fn quarter_structure(k: f64, theta: f64, w: f64) -> f64 {
    let c_coef = ensemble_closed_value(k, 2.0 * theta, FRAC_PI_4, 0.0);
    let s_coef = ensemble_closed_value(k, 2.0 * theta, FRAC_PI_4, FRAC_PI_2);
    -c_coef * w.cos() + s_coef * w.sin()
}

/// Tracks one special-phase diff over a set of parameter points.
#[derive(Debug, Default)]
struct SpecialAccumulator {
    structural: f64,
    naive: f64,
    count: usize,
}

impl SpecialAccumulator {
    fn add(&mut self, phase: SpecialPhase, p: &ProtocolParams) -> Result<()> {
        let sc = special_case(phase.phase(), p)?;
        let k = sc.general.prefactor;
        let expected = match phase {
            SpecialPhase::Zero | SpecialPhase::HalfPi => -sc.general.value,
            SpecialPhase::QuarterPi => quarter_structure(k, p.rotation_angle(), p.correlation_phase()),
        };
        self.structural = self.structural.max((sc.displayed - expected).abs() / k);
        self.naive = self.naive.max(sc.difference().abs() / k);
        self.count += 1;
        Ok(())
    }

    fn entry(&self, phase: SpecialPhase) -> ReconciliationEntry {
        let (id, description, expectation) = match phase {
            SpecialPhase::Zero => (
                "special.zero",
                "phi_rf = 0 display vs general ensemble form",
                "display = -general (global sign)",
            ),
            SpecialPhase::HalfPi => (
                "special.half_pi",
                "phi_rf = pi/2 display vs general ensemble form",
                "display = -general (global sign)",
            ),
            SpecialPhase::QuarterPi => (
                "special.quarter_pi",
                "phi_rf = pi/4 display vs general ensemble form",
                "display uses full-angle cos^2/sin^2(Omega t_p) where the general form has half angles, with the cos W term negated",
            ),
        };
        const TOL: f64 = 1e-12;
        let ok = self.count > 0 && self.structural <= TOL;
        let mut e = ReconciliationEntry::new(id, description, expectation)
            .detail("points", self.count as f64)
            .detail("max_display_minus_general_over_k", self.naive)
            .verdict(self.structural, TOL, ok);
        if self.naive > TOL {
            e.offending.push(format!("{id} display"));
        }
        e
    }
}

pub fn check_special_cases(draws: usize, rng: &mut impl Rng) -> Result<Vec<ReconciliationEntry>> {
    let phases = [SpecialPhase::Zero, SpecialPhase::QuarterPi, SpecialPhase::HalfPi];
    let mut acc: Vec<SpecialAccumulator> = phases.iter().map(|_| SpecialAccumulator::default()).collect();
    for _ in 0..draws {
        let p = random_params(rng, true);
        for (a, ph) in acc.iter_mut().zip(phases) {
            a.add(ph, &p)?;
        }
    }
    Ok(acc.iter().zip(phases).map(|(a, ph)| a.entry(ph)).collect())
}

/// Special-phase diffs for the traces of a sweep whose φ_RF is 0, π/4 or
/// π/2. Traces with non-resonant timing are skipped.
pub fn sweep_reconciliation(result: &SweepResult, config: &ExperimentConfig) -> Option<ReconciliationReport> {
    let phases = [SpecialPhase::Zero, SpecialPhase::QuarterPi, SpecialPhase::HalfPi];
    let mut acc: Vec<SpecialAccumulator> = phases.iter().map(|_| SpecialAccumulator::default()).collect();
    for trace in &result.traces {
        let m = &trace.meta;
        let axis = m.phi_rf - m.omega_y.atan2(m.omega_x);
        let Some(phase) = SpecialPhase::from_phase(axis) else {
            continue;
        };
        let slot = phases.iter().position(|p| *p == phase).expect("listed phase");
        for tc in &trace.tau_corr {
            let Ok(timing) = SequenceTiming::new(m.tau, m.t_p, tc + m.idle_offset) else {
                continue;
            };
            let Ok(p) = ProtocolParams::new(
                m.omega,
                m.rabi,
                axis,
                timing,
                config.sample.b_max,
                config.constants.gamma_e_abs(),
            ) else {
                continue;
            };
            let _ = acc[slot].add(phase, &p);
        }
    }
    let entries: Vec<_> = acc
        .iter()
        .zip(phases)
        .filter(|(a, _)| a.count > 0)
        .map(|(a, ph)| a.entry(ph))
        .collect();
    (!entries.is_empty()).then(|| ReconciliationReport::from_entries(entries))
}

/// Lab-frame Bloch dynamics against the rotating-frame rotation form.
pub fn check_rwa() -> Result<ReconciliationEntry> {
    let ratios = [0.02, 0.01, 0.005];
    let mut scaled = Vec::with_capacity(3);
    let mut e = ReconciliationEntry::new(
        "rwa.budget",
        "Bloch equation vs rotating-wave closed form over a pi pulse",
        "max deviation <= 5 Omega/omega and linear in Omega/omega (+-50%)",
    );
    for r in ratios {
        let drive = RfDrive::aligned(r * CHECK_OMEGA, CHECK_OMEGA, 0.0)?;
        let d = rwa_deviation(CHECK_OMEGA, &drive, Vector3::z(), None)?;
        e = e.detail(&format!("deviation_at_{r}"), d);
        scaled.push(d / r);
    }
    let worst = scaled.iter().cloned().fold(0.0, f64::max);
    let linear = scaled.iter().all(|s| (s / scaled[1] - 1.0).abs() <= 0.5);
    Ok(e.detail("linear_scaling", if linear { 1.0 } else { 0.0 })
        .verdict(worst, 5.0, worst <= 5.0 && linear))
}

/// Direction of the axis shift for a drive with equal x̂ and ŷ parts.
pub fn check_misalignment_axis() -> Result<ReconciliationEntry> {
    let r = 0.01;
    let phi = 0.3;
    let c = r * CHECK_OMEGA / 2f64.sqrt();
    let drive = RfDrive::misaligned(c, c, CHECK_OMEGA, phi)?;
    let forward = rwa_deviation(CHECK_OMEGA, &drive, Vector3::z(), Some(phi + FRAC_PI_4))?;
    let rule = rwa_deviation(CHECK_OMEGA, &drive, Vector3::z(), Some(phi - FRAC_PI_4))?;
    let ok = forward <= 5.0 * r && rule > 0.5;
    Ok(ReconciliationEntry::new(
        "misalignment.axis",
        "nutation axis of a misaligned linear drive in the lab-frame Bloch equation",
        "physical axis sits at phi + atan(Omega_y/Omega_x); the substitution rule phi - atan(...) is off by 2 atan",
    )
    .detail("deviation_plus_atan", forward)
    .detail("deviation_minus_atan", rule)
    .verdict(forward, 5.0 * r, ok))
}

/// Exact readout against the small-angle readout in the ensemble average.
pub fn check_small_angle() -> Result<ReconciliationEntry> {
    let constants = PhysicalConstants::default();
    let timing = SequenceTiming::resonant(CHECK_OMEGA, 3e-6, 2e-6)?;
    let dev = |scale: f64| -> Result<f64> {
        let p = ProtocolParams::new(
            CHECK_OMEGA,
            0.0,
            0.0,
            timing,
            b_max_for(scale, CHECK_OMEGA, &constants),
            constants.gamma_e_abs(),
        )?;
        let exact = ensemble_average_exact_readout(&p, EnsembleResolution::default())?;
        let small = ensemble_average_quadrature(&p, EnsembleResolution::default())?;
        Ok((exact.value - small.value).abs() / p.prefactor())
    };
    let d1 = dev(1e-2)?;
    let d2 = dev(5e-3)?;
    let ratio = d1 / d2;
    // Quadratic scaling: halving the coupling quarters the deviation.
    let ok = (ratio / 4.0 - 1.0).abs() <= 0.25;
    Ok(ReconciliationEntry::new(
        "small_angle.guard",
        "exact vs small-angle readout in the ensemble average",
        "deviation over K grows quadratically in B_max|gamma_e|/omega (about 3 x^2), exceeding 1e-4 at x = 1e-2",
    )
    .detail("deviation_at_1e-2", d1)
    .detail("deviation_at_5e-3", d2)
    .detail("exceeds_1e-4_at_1e-2", if d1 > 1e-4 { 1.0 } else { 0.0 })
    .verdict(ratio, 4.0, ok))
}

/// The reference interpulse delay against the resonant τ = π/ω.
pub fn check_reference_delay() -> Result<ReconciliationEntry> {
    let constants = PhysicalConstants::default();
    let omega = larmor_frequency(&NvSample::default(), &constants)?;
    let tau = PI / omega;
    let ratio = REFERENCE_DELAY / tau;
    Ok(ReconciliationEntry::new(
        "timing.reference_delay",
        "188.1 ns interpulse delay vs resonant tau = pi/omega at 31.2 mT",
        "delay is half the resonant tau (a quarter Larmor period); flagged, not reconciled",
    )
    .detail("omega", omega)
    .detail("resonant_tau", tau)
    .detail("reference_delay", REFERENCE_DELAY)
    .detail("omega_tau_at_delay", omega * REFERENCE_DELAY)
    .verdict(ratio, 0.5, (ratio - 0.5).abs() <= 0.01))
}

/// The echo factor sin²(ωτ/2) under the literal reading 2τ = 1/ω.
pub fn check_literal_resonance() -> Result<ReconciliationEntry> {
    let wt: f64 = 0.5;
    let factor = (0.5 * wt).sin().powi(2);
    Ok(ReconciliationEntry::new(
        "timing.literal_resonance",
        "resonance written as 2 tau = 1/omega vs the omega tau = pi used by the resonant forms",
        "literal reading gives omega tau = 0.5 and an echo factor sin^2(omega tau/2) far below 1",
    )
    .detail("omega_tau_literal", wt)
    .detail("echo_factor_literal", factor)
    .detail("echo_factor_resonant", 1.0)
    .verdict(factor, 0.1, factor < 0.1))
}

/// The expanded field transcriptions against the rotation form.
pub fn check_field_expansions(draws: usize, rng: &mut impl Rng) -> Result<ReconciliationEntry> {
    let mut worst = [0.0f64; 4];
    for _ in 0..draws {
        let p = random_params(rng, false);
        let a = random_angles(rng);
        let drive = RfDrive::aligned(p.rabi, p.omega, p.axis_phase)?;
        let t = rng.random_range(0.0..1e-5);
        let w = p.omega;
        let f1 = field_stage1(a, w, 1.0).eval(t);
        let f2 = field_stage2(a, w, &drive, &p.timing, 1.0)?.eval(t);
        let f3 = field_stage3(a, w, &drive, &p.timing, 1.0)?.eval(t);
        worst[0] = worst[0].max((f1 - expanded::b1(t, a, w, 1.0)).abs());
        worst[1] = worst[1].max((f2 - expanded::b2(t, a, w, p.rabi, p.axis_phase, p.timing.tau, 1.0)).abs());
        worst[2] =
            worst[2].max((f3 - expanded::b3(t, a, w, p.rabi, p.axis_phase, p.timing.tau, p.timing.t_p, 1.0)).abs());
        let rt = SequenceTiming::resonant(w, p.timing.t_p, 0.0)?;
        let f3r = field_stage3(a, w, &drive, &rt, 1.0)?.eval(t);
        worst[3] = worst[3].max((f3r - expanded::b3_resonant(t, a, w, p.rabi, p.axis_phase, p.timing.t_p, 1.0)).abs());
    }
    let observed = worst.iter().cloned().fold(0.0, f64::max);
    let mut e = ReconciliationEntry::new(
        "fields.expanded",
        "expanded stage-field formulas vs rotation composition (B_max = 1)",
        "agreement within 1e-9",
    )
    .detail("b1", worst[0])
    .detail("b2", worst[1])
    .detail("b3", worst[2])
    .detail("b3_resonant", worst[3]);
    for (name, v) in ["b1", "b2", "b3", "b3_resonant"].iter().zip(worst) {
        if v > 1e-9 {
            e.offending.push(name.to_string());
        }
    }
    let ok = e.offending.is_empty();
    Ok(e.verdict(observed, 1e-9, ok))
}

/// The transverse geometry integrals vanish by symmetry.
pub fn check_geometry() -> Result<ReconciliationEntry> {
    let g = hemisphere_integral(5e-9, 16)?;
    let worst = g.i_x.abs().max(g.i_y.abs());
    Ok(ReconciliationEntry::new(
        "geometry.symmetry",
        "hemisphere integrals at 5 nm depth",
        "I_x and I_y below the quadrature error estimate; I_f self-convergent",
    )
    .detail("i_x", g.i_x)
    .detail("i_y", g.i_y)
    .detail("i_f", g.i_f)
    .detail("error", g.error)
    .verdict(worst, g.error, worst <= g.error && g.converged))
}

/// Runs the full suite.
pub fn run_validation(settings: ValidationSettings) -> Result<ReconciliationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut entries = vec![
        check_general_phases(settings.phase_draws, &mut rng)?,
        check_resonant_phases(settings.phase_draws, &mut rng)?,
        check_phi2_coupling(settings.phase_draws / 4, &mut rng)?,
        check_field_expansions(settings.phase_draws, &mut rng)?,
        check_ensemble(settings.ensemble_draws, &mut rng)?,
    ];
    entries.extend(check_special_cases(settings.ensemble_draws, &mut rng)?);
    entries.extend([
        check_rwa()?,
        check_misalignment_axis()?,
        check_small_angle()?,
        check_reference_delay()?,
        check_literal_resonance()?,
        check_geometry()?,
    ]);
    Ok(ReconciliationReport::from_entries(entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn phase_checks_pass_on_a_few_draws() {
        assert!(check_general_phases(20, &mut rng()).unwrap().matches);
        assert!(check_resonant_phases(20, &mut rng()).unwrap().matches);
    }

    #[test]
    fn phi2_ratio_is_gamma() {
        let e = check_phi2_coupling(10, &mut rng()).unwrap();
        assert!(e.matches, "{e:?}");
        let g = PhysicalConstants::default().gamma_e_abs();
        assert!((e.details["mean_ratio"] / g - 1.0).abs() < 1e-6);
        assert!(e.details["transcribed_max_rel"] > 1e-2);
    }

    #[test]
    fn special_case_diffs_are_catalogued() {
        let es = check_special_cases(20, &mut rng()).unwrap();
        assert_eq!(es.len(), 3);
        for e in &es {
            assert!(e.matches, "{e:?}");
            assert!(e.details["max_display_minus_general_over_k"] > 0.1, "{e:?}");
        }
    }

    #[test]
    fn quarter_structure_reproduces_display() {
        let (k, th, w) = (2.0, 0.7, 1.9);
        let disp = SpecialPhase::QuarterPi.displayed(k, th, w);
        assert!((quarter_structure(k, th, w) - disp).abs() < 1e-12);
    }

    #[test]
    fn timing_entries() {
        let d = check_reference_delay().unwrap();
        assert!(d.matches && (d.observed - 0.5).abs() < 1e-3, "{d:?}");
        assert!(check_literal_resonance().unwrap().matches);
    }

    #[test]
    fn small_angle_is_quadratic_and_exceeds_guard() {
        let e = check_small_angle().unwrap();
        assert!(e.matches, "{e:?}");
        assert_eq!(e.details["exceeds_1e-4_at_1e-2"], 1.0);
    }

    #[test]
    fn report_display_lists_entries() {
        let r = ReconciliationReport::from_entries(vec![check_reference_delay().unwrap()]);
        let s = r.to_string();
        assert!(s.contains("timing.reference_delay") && s.contains("suite passed"));
    }
}
