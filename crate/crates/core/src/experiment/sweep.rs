//! Sweep orchestration over (φ_RF, drive strength, τ̃).

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::config::{Engine, ExperimentConfig};
use crate::experiment::fit::{amplitude_ratio, fit_sinusoid, AmplitudeRatio, SinusoidFit};
use crate::model::{RfDrive, SequenceTiming};
use crate::oracle::end_to_end::{end_to_end_oracle, OracleExperiment};
use crate::protocol::ProtocolParams;
use crate::readout::{
    ensemble_average_closed, ensemble_average_monte_carlo, ensemble_average_quadrature, EnsembleSignal,
};

/// Generator phase to program at burst onset t₁ so that the waveform,
/// extrapolated back to t = 0, has phase φ_RF.
pub fn rf_start_phase(phi_rf_at_origin: f64, omega_rf: f64, onset: f64) -> f64 {
    (phi_rf_at_origin + omega_rf * onset).rem_euclid(TAU)
}

/// Smallest angular distance between two phases.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMeta {
    pub phi_rf: f64,
    /// Effective Rabi rate, rad/s.
    pub rabi: f64,
    pub rotation_angle: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub engine: Engine,
    pub prefactor: f64,
    pub omega: f64,
    pub tau: f64,
    pub t_p: f64,
    pub idle_offset: f64,
    /// Generator phase at burst onset.
    pub rf_start_phase: f64,
    pub vpp: Option<f64>,
    /// "sigma_z" or "pl" (sign flipped).
    pub convention: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub meta: TraceMeta,
    /// Nominal correlation times, s, strictly increasing.
    pub tau_corr: Vec<f64>,
    pub signal: Vec<f64>,
    /// Absolute error estimate per point (0 for closed forms).
    pub error: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn validate(&self) -> Result<()> {
        if self.tau_corr.len() != self.signal.len() {
            return Err(Error::domain("trace lengths differ"));
        }
        if self.tau_corr.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("correlation times must be strictly increasing"));
        }
        Ok(())
    }

    pub fn fit(&self) -> Result<SinusoidFit> {
        fit_sinusoid(&self.tau_corr, &self.signal, self.meta.omega)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub index: usize,
    pub meta: TraceMeta,
    pub fit: Option<SinusoidFit>,
    pub fit_error: Option<String>,
    /// Relative to the Ω = 0 trace with the same φ_RF, when present.
    pub ratio: Option<AmplitudeRatio>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub traces: Vec<Trace>,
    pub summaries: Vec<TraceSummary>,
}

struct Point {
    trace: usize,
    params: ProtocolParams,
    drive: RfDrive,
    seed: u64,
}

fn evaluate(config: &ExperimentConfig, p: &Point) -> Result<(EnsembleSignal, Vec<String>)> {
    let e = &config.engine;
    match e.kind {
        Engine::ClosedForm => Ok((ensemble_average_closed(&p.params)?, vec![])),
        Engine::Quadrature if e.monte_carlo_samples > 0 => Ok((
            ensemble_average_monte_carlo(&p.params, e.monte_carlo_samples, p.seed, e.resolution.phase_order)?,
            vec![],
        )),
        Engine::Quadrature => Ok((ensemble_average_quadrature(&p.params, e.resolution)?, vec![])),
        Engine::Oracle => {
            let exp = OracleExperiment {
                omega: p.params.omega,
                drive: p.drive,
                timing: p.params.timing,
                b_max: p.params.b_max,
                constants: config.constants,
            };
            let out = end_to_end_oracle(&exp, e.oracle)?;
            Ok((out.signal, out.warnings))
        }
    }
}

/// Splits Ω into x̂ and ŷ parts with Ω_y/Ω_x = m.
fn split_drive(rabi: f64, m: f64) -> (f64, f64) {
    let n = (1.0 + m * m).sqrt();
    (rabi / n, rabi * m / n)
}

/// Evaluates every (φ_RF, drive) trace over the τ̃ grid on a pool of
/// `workers` threads. Points are independent; results are collected in a
/// fixed order, so the output does not depend on the worker count.
pub fn run_sweep(config: &ExperimentConfig, workers: usize, seed: u64) -> Result<SweepResult> {
    let omega = config.larmor()?;
    let tau = config.tau()?;
    let rabis = config.drive.rabi_rates(config.t_p);
    let taus = config.tau_corr.points();
    let gamma_e_abs = config.constants.gamma_e_abs();
    let sign = if config.output.pl_sign { -1.0 } else { 1.0 };

    let mut metas = Vec::new();
    let mut points = Vec::new();
    for &phi in &config.phi_rf {
        for &rabi in &rabis {
            let (ox, oy) = split_drive(rabi, config.misalignment);
            let drive = RfDrive::misaligned(ox, oy, omega, phi)?;
            let base_timing = SequenceTiming::new(tau, config.t_p, 0.0)?;
            let trace = metas.len();
            let mut prefactor = 0.0;
            for (i, &tc) in taus.iter().enumerate() {
                let timing = base_timing.with_tau_corr(tc + config.idle_offset)?;
                let params = ProtocolParams::from_drive(omega, &drive, timing, config.sample.b_max, &config.constants)
                    .map_err(|e| Error::domain(format!("phi_rf = {phi}, rabi = {rabi}: {e}")))?;
                prefactor = params.prefactor();
                points.push(Point {
                    trace,
                    params,
                    drive,
                    seed: seed.wrapping_add((trace * taus.len() + i) as u64),
                });
            }
            metas.push(TraceMeta {
                phi_rf: phi,
                rabi,
                rotation_angle: rabi * config.t_p,
                omega_x: ox,
                omega_y: oy,
                engine: config.engine.kind,
                prefactor: if taus.is_empty() {
                    TAU * (config.sample.b_max * gamma_e_abs / omega).powi(2)
                } else {
                    prefactor
                },
                omega,
                tau,
                t_p: config.t_p,
                idle_offset: config.idle_offset,
                rf_start_phase: rf_start_phase(phi, omega, 2.0 * tau),
                vpp: config.vpp_map.map(|m| m.vpp(rabi)),
                convention: if config.output.pl_sign {
                    "pl".into()
                } else {
                    "sigma_z".into()
                },
            });
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<(EnsembleSignal, Vec<String>)>> =
        pool.install(|| points.par_iter().map(|p| evaluate(config, p)).collect());

    let mut traces: Vec<Trace> = metas
        .into_iter()
        .map(|meta| Trace {
            meta,
            tau_corr: Vec::with_capacity(taus.len()),
            signal: Vec::with_capacity(taus.len()),
            error: Vec::with_capacity(taus.len()),
            warnings: Vec::new(),
        })
        .collect();
    for (point, (res, &tc)) in points.iter().zip(results.into_iter().zip(taus.iter().cycle())) {
        let (sig, warnings) = res.map_err(|e| {
            let m = &traces[point.trace].meta;
            Error::domain(format!(
                "phi_rf = {}, rabi = {}, tau_corr = {tc}: {e}",
                m.phi_rf, m.rabi
            ))
        })?;
        let t = &mut traces[point.trace];
        t.tau_corr.push(tc);
        t.signal.push(sign * sig.value);
        t.error.push(sig.error);
        for w in warnings {
            if !t.warnings.contains(&w) {
                t.warnings.push(w);
            }
        }
    }

    let summaries = summarize(&traces);
    Ok(SweepResult { traces, summaries })
}

/// Fits every trace and forms amplitude ratios against the undriven trace
/// of the same φ_RF.
pub fn summarize(traces: &[Trace]) -> Vec<TraceSummary> {
    let fits: Vec<Result<SinusoidFit>> = traces.iter().map(|t| t.fit()).collect();
    traces
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let reference = traces
                .iter()
                .zip(&fits)
                .find(|(r, f)| r.meta.phi_rf == t.meta.phi_rf && r.meta.rabi == 0.0 && f.is_ok())
                .and_then(|(_, f)| f.as_ref().ok());
            let (fit, fit_error) = match &fits[i] {
                Ok(f) => (Some(*f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let ratio = match (fit, reference) {
                (Some(f), Some(r)) => amplitude_ratio(&f, r),
                _ => None,
            };
            TraceSummary {
                index: i,
                meta: t.meta.clone(),
                fit,
                fit_error,
                ratio,
            }
        })
        .collect()
}
