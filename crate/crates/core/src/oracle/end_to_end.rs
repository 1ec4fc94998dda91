//! Closed-form-free pipeline: Bloch trajectories → field samples → Simpson
//! phases → unitary-product readout → grid orientation average.
//!
//! The stage fields and phase windows follow the same convention as
//! [`crate::phases`]: each stage is integrated in its own local time and
//! sampled over the windows placed on the global clock. In stage 2 the
//! drive therefore stays on until local time 2τ + t_p, with M₂ read off at
//! local t_p.

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Magnetization, PhysicalConstants, RfDrive, SequenceTiming};
use crate::oracle::bloch::{even_steps, integrate_steps, BlochProblem, DEFAULT_STEPS_PER_PERIOD};
use crate::oracle::propagator::readout_from_propagator;
use crate::phases::{PhaseBasis, PhaseSet};
use crate::quadrature::simpson_uniform;
use crate::readout::{AveragingMethod, EnsembleGrid, EnsembleSignal};

/// Largest B_max|γ_e|/ω for which the pipeline is compared against
/// small-angle results without a warning.
pub const SMALL_ANGLE_LIMIT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSettings {
    pub steps_per_period: usize,
    pub grid: EnsembleGrid,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            grid: EnsembleGrid {
                n_alpha: 16,
                n_beta: 16,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleExperiment {
    pub omega: f64,
    pub drive: RfDrive,
    pub timing: SequenceTiming,
    pub b_max: f64,
    pub constants: PhysicalConstants,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSignal {
    pub signal: EnsembleSignal,
    pub phase_scale: f64,
    pub warnings: Vec<String>,
}

struct SegmentRun {
    start: f64,
    end: f64,
    /// ∫ M_x over the segment.
    integral: f64,
}

/// Integrates `problem` from local time 0 through every breakpoint,
/// returning per-segment integrals of M_x and the state at each breakpoint.
fn run_segments(
    problem: &BlochProblem,
    m: Vector3<f64>,
    breakpoints: &[f64],
) -> Result<(Vec<SegmentRun>, Vec<Vector3<f64>>)> {
    let mut points: Vec<f64> = breakpoints.to_vec();
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
    let mut state = m;
    let mut states = vec![state];
    let mut runs = Vec::with_capacity(points.len());
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = even_steps(b - a, problem.step);
        let traj = integrate_steps(problem, a, state, b - a, n)?;
        let samples: Vec<f64> = traj.states.iter().map(|s| s.x).collect();
        runs.push(SegmentRun {
            start: a,
            end: b,
            integral: simpson_uniform(&samples, (b - a) / n as f64),
        });
        state = traj.last();
        states.push(state);
    }
    // Report states against the original breakpoint list.
    let lookup = |t: f64| {
        let idx = points
            .iter()
            .position(|p| (p - t).abs() <= 1e-15 * t.abs().max(1e-300))
            .unwrap_or(0);
        states[idx]
    };
    Ok((runs, breakpoints.iter().map(|t| lookup(*t)).collect()))
}

fn window_integral(runs: &[SegmentRun], from: f64, to: f64) -> f64 {
    let eps = 1e-12 * to.abs().max(1e-300);
    runs.iter()
        .filter(|r| r.start >= from - eps && r.end <= to + eps)
        .map(|r| r.integral)
        .sum()
}

/// Phases for one initial magnetization from three Bloch integrations.
pub fn oracle_phases(exp: &OracleExperiment, m0: &Magnetization, steps_per_period: usize) -> Result<PhaseSet> {
    let tm = &exp.timing;
    let gamma_n = exp.constants.gamma_n;
    let b_ext = exp.omega / gamma_n;
    let coupling = exp.b_max * exp.constants.gamma_e_abs();
    let problem = |span: f64| {
        BlochProblem::with_field(Vector3::zeros(), b_ext, gamma_n, span).with_steps_per_period(steps_per_period)
    };

    // Stage 1: free precession over the first interrogation block.
    let p1 = problem(tm.t1());
    p1.validate()?;
    let (runs, states) = run_segments(&p1, *m0.vector(), &[0.0, tm.tau, tm.t1()])?;
    let phi1 = coupling * (window_integral(&runs, 0.0, tm.tau) - window_integral(&runs, tm.tau, tm.t1()));
    let m1 = states[2];

    // Stage 2: driven, generator phase referred back to the global origin.
    let onset = RfDrive {
        phi_rf: exp.drive.phi_rf + exp.drive.omega_rf * tm.t1(),
        ..exp.drive
    };
    let end2 = tm.t1() + tm.t_p;
    let p2 = problem(end2).with_drive(&onset);
    let (runs, states) = run_segments(&p2, m1, &[0.0, tm.t_p, tm.t1(), end2])?;
    let phi2 = coupling * window_integral(&runs, tm.t1(), end2);
    let m2 = states[1];

    // Stage 3: free precession through the correlation time and the
    // second block.
    let t2 = tm.t2();
    let a = t2 + tm.tau_corr;
    let end3 = a + 2.0 * tm.tau;
    let p3 = problem(end3);
    let (runs, _) = run_segments(&p3, m2, &[0.0, t2, a, a + tm.tau, end3])?;
    let phi3 = coupling * window_integral(&runs, t2, a);
    let phi4 = coupling * (window_integral(&runs, a, a + tm.tau) - window_integral(&runs, a + tm.tau, end3));
    Ok(PhaseSet::new(phi1, phi2, phi3, phi4))
}

pub fn oracle_phase_basis(exp: &OracleExperiment, steps_per_period: usize) -> Result<PhaseBasis> {
    let axes = Magnetization::basis().map(|m| oracle_phases(exp, &m, steps_per_period));
    let [x, y, z] = axes;
    Ok(PhaseBasis::from_axis_phases([x?, y?, z?], [0.0; 4]))
}

/// Ensemble signal from the full numerical pipeline.
pub fn end_to_end_oracle(exp: &OracleExperiment, settings: OracleSettings) -> Result<OracleSignal> {
    settings.grid.validate()?;
    if exp.omega <= 0.0 {
        return Err(Error::domain("omega must be positive"));
    }
    let phase_scale = exp.b_max * exp.constants.gamma_e_abs() / exp.omega;
    let mut warnings = Vec::new();
    if phase_scale > SMALL_ANGLE_LIMIT {
        warnings.push(format!(
            "B_max|gamma_e|/omega = {phase_scale:.3e} exceeds {SMALL_ANGLE_LIMIT:e}; small-angle comparisons do not apply"
        ));
    }
    if !exp.timing.is_resonant(exp.omega) {
        warnings.push(format!(
            "omega*tau = {:.9} is not pi; closed forms do not apply",
            exp.omega * exp.timing.tau
        ));
    }
    if exp.drive.is_active() && !exp.drive.is_resonant_with(exp.omega) {
        warnings.push("off-resonant RF; closed forms do not apply".to_string());
    }
    let basis = oracle_phase_basis(exp, settings.steps_per_period)?;
    let (value, error) = settings
        .grid
        .average_with_error(|a| readout_from_propagator(&basis.phases(a)).value);
    Ok(OracleSignal {
        signal: EnsembleSignal {
            value,
            prefactor: std::f64::consts::TAU * phase_scale * phase_scale,
            method: AveragingMethod::Oracle,
            error,
        },
        phase_scale,
        warnings,
    })
}
