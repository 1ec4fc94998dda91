//! Laboratory-frame Bloch equation with a linearly polarised RF field, no
//! rotating-wave approximation.
//!
//! The magnetization obeys dM/dt = γ B(t) × M, which for γ > 0 turns M
//! counter-clockwise about B, the same sense as R_z(ωt). The co-rotating
//! half of a linear drive B_RF cos(ω t + φ) x̂ nutates M at Ω = γ B_RF / 2.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::model::{Magnetization, RfDrive};
use crate::rotations::propagate_driven;

/// Default number of RK4 steps per Larmor period.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 2000;
/// Coarsest step allowed, in steps per Larmor period.
pub const MIN_STEPS_PER_PERIOD: usize = 1000;

/// One linearly polarised RF component B cos(ω t + φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RfComponent {
    /// Amplitude, T.
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

impl RfComponent {
    pub const OFF: RfComponent = RfComponent {
        amplitude: 0.0,
        omega: 0.0,
        phase: 0.0,
    };

    fn at(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            0.0
        } else {
            self.amplitude * (self.omega * t + self.phase).cos()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochProblem {
    pub m0: Vector3<f64>,
    /// Static field along ẑ, T.
    pub b_ext: f64,
    pub rf_x: RfComponent,
    pub rf_y: RfComponent,
    /// Longitudinal RF component, normally left off.
    pub rf_z: RfComponent,
    /// Gyromagnetic ratio, rad/s/T.
    pub gamma: f64,
    pub t_span: f64,
    /// Maximum step, s.
    pub step: f64,
}

impl BlochProblem {
    /// Free precession at angular frequency ω (γ = ω/B_ext with B_ext = 1 T
    /// unless built through [`BlochProblem::with_field`]).
    pub fn free(m0: Vector3<f64>, omega: f64, t_span: f64) -> Self {
        BlochProblem {
            m0,
            b_ext: 1.0,
            rf_x: RfComponent::OFF,
            rf_y: RfComponent::OFF,
            rf_z: RfComponent::OFF,
            gamma: omega,
            t_span,
            step: TAU / omega.abs() / DEFAULT_STEPS_PER_PERIOD as f64,
        }
    }

    /// Physical parameterisation by static field and gyromagnetic ratio.
    pub fn with_field(m0: Vector3<f64>, b_ext: f64, gamma: f64, t_span: f64) -> Self {
        let omega = gamma * b_ext;
        BlochProblem {
            b_ext,
            gamma,
            ..Self::free(m0, omega, t_span)
        }
    }

    /// Adds the linear drive whose co-rotating parts give Rabi rates
    /// (Ω_x, Ω_y) at carrier ω_RF and phase φ_RF (time measured from the
    /// start of the problem).
    pub fn with_drive(mut self, drive: &RfDrive) -> Self {
        let to_field = |rabi: f64| 2.0 * rabi / self.gamma;
        self.rf_x = RfComponent {
            amplitude: to_field(drive.omega_x),
            omega: drive.omega_rf,
            phase: drive.phi_rf,
        };
        self.rf_y = RfComponent {
            amplitude: to_field(drive.omega_y),
            omega: drive.omega_rf,
            phase: drive.phi_rf,
        };
        self
    }

    /// Adds a longitudinal RF component of the given amplitude in phase
    /// with the x̂ component.
    pub fn with_longitudinal(mut self, amplitude: f64) -> Self {
        self.rf_z = RfComponent { amplitude, ..self.rf_x };
        self
    }

    pub fn with_steps_per_period(mut self, n: usize) -> Self {
        self.step = self.larmor_period() / n as f64;
        self
    }

    pub fn larmor_period(&self) -> f64 {
        TAU / (self.gamma * self.b_ext).abs()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("b_ext", self.b_ext),
            ("gamma", self.gamma),
            ("t_span", self.t_span),
            ("step", self.step),
        ] {
            ensure_finite(name, v)?;
        }
        if !self.m0.iter().all(|c| c.is_finite()) {
            return Err(Error::domain("initial magnetization must be finite"));
        }
        if self.t_span < 0.0 {
            return Err(Error::domain("time span must be non-negative"));
        }
        if self.gamma * self.b_ext == 0.0 {
            return Err(Error::domain("Larmor frequency must be non-zero"));
        }
        let max_step = self.larmor_period() / MIN_STEPS_PER_PERIOD as f64;
        if !(self.step > 0.0 && self.step <= max_step * (1.0 + 1e-12)) {
            return Err(Error::domain(format!(
                "step {:.3e} s exceeds the Larmor period / {MIN_STEPS_PER_PERIOD} = {:.3e} s",
                self.step, max_step
            )));
        }
        Ok(())
    }

    /// Angular field vector γ B(t).
    pub fn precession_vector(&self, t: f64) -> Vector3<f64> {
        self.gamma * Vector3::new(self.rf_x.at(t), self.rf_y.at(t), self.b_ext + self.rf_z.at(t))
    }

    fn derivative(&self, t: f64, m: &Vector3<f64>) -> Vector3<f64> {
        self.precession_vector(t).cross(m)
    }

    fn rk4_step(&self, t: f64, m: &Vector3<f64>, h: f64) -> Vector3<f64> {
        let k1 = self.derivative(t, m);
        let k2 = self.derivative(t + 0.5 * h, &(m + 0.5 * h * k1));
        let k3 = self.derivative(t + 0.5 * h, &(m + 0.5 * h * k2));
        let k4 = self.derivative(t + h, &(m + h * k3));
        m + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector3<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> Vector3<f64> {
        *self.states.last().expect("trajectory is never empty")
    }

    /// Largest |‖M(t)‖ − ‖M(0)‖| / ‖M(0)‖ along the trajectory.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.states[0].norm();
        self.states
            .iter()
            .map(|m| (m.norm() - n0).abs() / n0)
            .fold(0.0, f64::max)
    }
}

/// Number of uniform steps covering `span` with steps no longer than `step`,
/// rounded up to an even count so the samples suit Simpson's rule.
pub fn even_steps(span: f64, step: f64) -> usize {
    let n = (span / step).ceil().max(2.0) as usize;
    n + n % 2
}

/// Fixed-step classical RK4 over [0, t_span]. The step is the largest
/// value not exceeding `problem.step` that divides the span evenly.
pub fn integrate_bloch(problem: &BlochProblem) -> Result<Trajectory> {
    problem.validate()?;
    let n = even_steps(problem.t_span, problem.step);
    integrate_steps(problem, 0.0, problem.m0, problem.t_span, n)
}

/// Integrates from (t0, m) over `span` in exactly `n` uniform steps.
pub fn integrate_steps(problem: &BlochProblem, t0: f64, m: Vector3<f64>, span: f64, n: usize) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::domain("integration needs at least one step"));
    }
    let h = span / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut state = m;
    times.push(t0);
    states.push(state);
    for i in 0..n {
        let t = t0 + h * i as f64;
        state = problem.rk4_step(t, &state, h);
        times.push(t0 + h * (i + 1) as f64);
        states.push(state);
    }
    Ok(Trajectory { times, states })
}

/// Largest componentwise gap between the lab-frame Bloch trajectory over one
/// π pulse and the rotating-frame closed form R_z(ωt)·R_k(Ωt)·M₀. With
/// `reference_axis` the closed form uses an aligned drive of the same Rabi
/// rate about that azimuth instead of the drive's own effective axis.
pub fn rwa_deviation(omega: f64, drive: &RfDrive, m0: Vector3<f64>, reference_axis: Option<f64>) -> Result<f64> {
    let t_pi = std::f64::consts::PI / drive.rabi();
    let problem = BlochProblem::free(m0, omega, t_pi).with_drive(drive);
    let traj = integrate_bloch(&problem)?;
    let m = Magnetization::from_vector(m0)?;
    let reference = match reference_axis {
        Some(phi) => RfDrive::aligned(drive.rabi(), omega, phi)?,
        None => *drive,
    };
    let mut worst = 0.0f64;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let c = propagate_driven(&m, omega, &reference, *t)?;
        worst = worst.max((s - c.vector()).amax());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_4, PI};

    use super::*;

    const OMEGA: f64 = TAU * 1.33e6;

    #[test]
    fn free_precession_over_100_periods() {
        let span = 100.0 * TAU / OMEGA;
        let traj = integrate_bloch(&BlochProblem::free(Vector3::x(), OMEGA, span)).unwrap();
        for (t, m) in traj.times.iter().zip(&traj.states) {
            assert!((m.x - (OMEGA * t).cos()).abs() < 1e-9, "t = {t}");
            assert!((m.y - (OMEGA * t).sin()).abs() < 1e-9);
        }
        assert!(traj.norm_drift() < 1e-9);
    }

    #[test]
    fn z_is_stationary_without_drive() {
        let traj = integrate_bloch(&BlochProblem::free(Vector3::z(), OMEGA, 1e-5)).unwrap();
        assert_eq!(traj.last(), Vector3::z());
    }

    #[test]
    fn coarse_step_is_rejected() {
        let p = BlochProblem::free(Vector3::x(), OMEGA, 1e-6).with_steps_per_period(500);
        assert!(matches!(integrate_bloch(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn pi_pulse_inverts_within_rwa_budget() {
        let ratio = 0.01;
        let drive = RfDrive::aligned(ratio * OMEGA, OMEGA, 0.0).unwrap();
        let problem = BlochProblem::free(Vector3::z(), OMEGA, PI / drive.rabi()).with_drive(&drive);
        let traj = integrate_bloch(&problem).unwrap();
        assert!((traj.last().z + 1.0).abs() < 5.0 * ratio);
        assert!(traj.norm_drift() < 1e-9);
    }

    #[test]
    fn rwa_deviation_is_linear_in_drive_strength() {
        let devs: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|r| {
                let drive = RfDrive::aligned(r * OMEGA, OMEGA, 0.0).unwrap();
                rwa_deviation(OMEGA, &drive, Vector3::z(), None).unwrap() / r
            })
            .collect();
        for d in &devs {
            assert!(*d <= 5.0);
            assert!((d / devs[1] - 1.0).abs() <= 0.5, "{devs:?}");
        }
    }

    #[test]
    fn misaligned_drive_turns_the_axis_forward() {
        // Equal x̂ and ŷ components: the physical nutation axis sits at
        // φ + π/4.
        let r = 0.01;
        let drive = RfDrive::misaligned(r * OMEGA / 2f64.sqrt(), r * OMEGA / 2f64.sqrt(), OMEGA, 0.3).unwrap();
        let m0 = Vector3::z();
        let forward = rwa_deviation(OMEGA, &drive, m0, Some(0.3 + FRAC_PI_4)).unwrap();
        let backward = rwa_deviation(OMEGA, &drive, m0, Some(0.3 - FRAC_PI_4)).unwrap();
        assert!(forward <= 5.0 * r, "{forward}");
        assert!(backward > 0.5, "{backward}");
    }

    #[test]
    fn fourth_order_convergence() {
        let drive = RfDrive::aligned(0.02 * OMEGA, OMEGA, 0.4).unwrap();
        let span = 20.0 * TAU / OMEGA;
        let m0 = Magnetization::new(0.6, 0.0, 0.8).unwrap();
        let run = |n: usize| {
            let p = BlochProblem::free(*m0.vector(), OMEGA, span)
                .with_drive(&drive)
                .with_steps_per_period(n);
            integrate_bloch(&p).unwrap().last()
        };
        let (a, b, c) = (run(1000), run(2000), run(4000));
        let (d1, d2) = ((a - b).norm(), (b - c).norm());
        assert!(d2 * 12.0 <= d1, "{d1} {d2}");
    }

    #[test]
    fn longitudinal_component_barely_matters() {
        let r = 0.01;
        let drive = RfDrive::aligned(r * OMEGA, OMEGA, 0.0).unwrap();
        let span = PI / drive.rabi();
        let plain = BlochProblem::free(Vector3::z(), OMEGA, span).with_drive(&drive);
        let with_z = plain.with_longitudinal(plain.rf_x.amplitude);
        let a = integrate_bloch(&plain).unwrap().last();
        let b = integrate_bloch(&with_z).unwrap().last();
        assert!((a - b).amax() < 5.0 * r);
    }
}
