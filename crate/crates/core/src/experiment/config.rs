//! TOML experiment configuration.
//!
//! Quantities are strings with explicit units (`"31.2 mT"`, `"30 us"`,
//! `"16.7 kHz"`); Hz-based frequencies become rad/s here. Unknown keys are
//! rejected. Every error names the offending field and, where the document
//! provides it, the line.
//!
//! ```toml
//! [sample]
//! b_ext = "31.2 mT"
//! b_max = "1 T"
//!
//! [timing]
//! tau = "auto"
//! t_p = "30 us"
//! tau_corr = "60us:63us:51"
//!
//! [drive]
//! rotation_angles = ["0", "pi/2", "pi", "3pi/2", "2pi"]
//! phi_rf = ["0", "pi/4", "pi/2"]
//!
//! [engine]
//! name = "closed-form"
//! ```

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{Error, Result};
use crate::model::{larmor_frequency, resonant_tau, NvSample, PhysicalConstants};
use crate::oracle::bloch::{DEFAULT_STEPS_PER_PERIOD, MIN_STEPS_PER_PERIOD};
use crate::oracle::end_to_end::OracleSettings;
use crate::phases::DEFAULT_PHASE_ORDER;
use crate::readout::{EnsembleGrid, EnsembleResolution};
use crate::units::{parse_angle, parse_quantity, Dimension, SweepSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("config error")?;
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, " in `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    ClosedForm,
    Quadrature,
    Oracle,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::ClosedForm => "closed-form",
            Engine::Quadrature => "quadrature",
            Engine::Oracle => "oracle",
        }
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "closed-form" => Ok(Engine::ClosedForm),
            "quadrature" => Ok(Engine::Quadrature),
            "oracle" => Ok(Engine::Oracle),
            other => Err(format!(
                "unknown engine '{other}' (expected closed-form, quadrature or oracle)"
            )),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum TauSetting {
    /// τ = π/ω from the sample's Larmor frequency.
    Auto,
    Fixed(f64),
}

/// Drive strengths of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "values")]
pub enum DriveSweep {
    /// Rabi rates Ω, rad/s.
    Rabi(Vec<f64>),
    /// Rotation angles θ = Ω t_p, rad.
    RotationAngles(Vec<f64>),
}

impl DriveSweep {
    pub fn len(&self) -> usize {
        match self {
            DriveSweep::Rabi(v) | DriveSweep::RotationAngles(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rabi rates for a pulse of length t_p.
    pub fn rabi_rates(&self, t_p: f64) -> Vec<f64> {
        match self {
            DriveSweep::Rabi(v) => v.clone(),
            DriveSweep::RotationAngles(v) => v.iter().map(|th| if *th == 0.0 { 0.0 } else { th / t_p }).collect(),
        }
    }
}

/// Ω = slope · Vpp + intercept, used only to annotate outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VppMap {
    /// rad/s per volt.
    pub slope: f64,
    /// rad/s.
    pub intercept: f64,
}

impl VppMap {
    pub fn vpp(&self, rabi: f64) -> f64 {
        (rabi - self.intercept) / self.slope
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngineSettings {
    pub kind: Engine,
    pub resolution: EnsembleResolution,
    pub oracle: OracleSettings,
    /// Monte-Carlo samples for the quadrature engine; 0 selects the
    /// deterministic grid.
    pub monte_carlo_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSettings {
    /// Left out of the summary echo so that identical runs written to
    /// different directories produce identical files.
    #[serde(skip)]
    pub dir: Option<PathBuf>,
    /// Report −⟨σ_z⟩ instead of ⟨σ_z⟩.
    pub pl_sign: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub sample: NvSample,
    pub constants: PhysicalConstants,
    pub tau: TauSetting,
    pub t_p: f64,
    pub tau_corr: SweepSpec,
    /// Idle time added to every τ̃ before it enters the model, s.
    pub idle_offset: f64,
    pub drive: DriveSweep,
    pub phi_rf: Vec<f64>,
    /// Ω_y / Ω_x of the RF field.
    pub misalignment: f64,
    pub vpp_map: Option<VppMap>,
    pub engine: EngineSettings,
    pub output: OutputSettings,
}

impl ExperimentConfig {
    pub fn larmor(&self) -> Result<f64> {
        larmor_frequency(&self.sample, &self.constants)
    }

    pub fn tau(&self) -> Result<f64> {
        match self.tau {
            TauSetting::Auto => resonant_tau(self.larmor()?),
            TauSetting::Fixed(t) => Ok(t),
        }
    }

    /// The same configuration restricted to its first drive setting and
    /// first φ_RF.
    pub fn single_trace(&self) -> Self {
        let mut c = self.clone();
        c.drive = match &self.drive {
            DriveSweep::Rabi(v) => DriveSweep::Rabi(v[..1].to_vec()),
            DriveSweep::RotationAngles(v) => DriveSweep::RotationAngles(v[..1].to_vec()),
        };
        c.phi_rf.truncate(1);
        c
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(parse_config(&text)?)
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    sample: RawSample,
    #[serde(default)]
    constants: RawConstants,
    timing: Option<RawTiming>,
    #[serde(default)]
    drive: RawDrive,
    #[serde(default)]
    engine: RawEngine,
    #[serde(default)]
    output: RawOutput,
}

type Text = Spanned<String>;

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSample {
    b_ext: Option<Text>,
    depth: Option<Text>,
    spin_density: Option<Text>,
    b_max: Option<Text>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConstants {
    gamma_e: Option<Text>,
    gamma_n: Option<Text>,
    zero_field_splitting: Option<Text>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTiming {
    tau: Option<Text>,
    t_p: Option<Text>,
    tau_corr: Option<Text>,
    idle_offset: Option<Text>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    rabi: Option<Spanned<Vec<Text>>>,
    rotation_angles: Option<Spanned<Vec<Text>>>,
    phi_rf: Option<Spanned<Vec<Text>>>,
    misalignment: Option<Spanned<f64>>,
    vpp_slope: Option<Text>,
    vpp_intercept: Option<Text>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    name: Option<Text>,
    phase_order: Option<Spanned<i64>>,
    n_alpha: Option<Spanned<i64>>,
    n_beta: Option<Spanned<i64>>,
    oracle_steps_per_period: Option<Spanned<i64>>,
    oracle_n_alpha: Option<Spanned<i64>>,
    oracle_n_beta: Option<Spanned<i64>>,
    monte_carlo_samples: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    pl_sign: Option<bool>,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, field: &str, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            field: Some(field.to_string()),
            line: span.map(|s| line_of(self.text, s)),
            message: message.into(),
        }
    }

    fn quantity(&self, field: &str, v: &Text, dim: Dimension) -> Result<f64, ConfigError> {
        parse_quantity(v.get_ref(), dim).map_err(|e| self.err(field, Some(v.span()), e.0))
    }

    fn opt_quantity(&self, field: &str, v: &Option<Text>, dim: Dimension, default: f64) -> Result<f64, ConfigError> {
        v.as_ref().map_or(Ok(default), |v| self.quantity(field, v, dim))
    }

    fn non_negative(&self, field: &str, v: &Text, dim: Dimension) -> Result<f64, ConfigError> {
        let x = self.quantity(field, v, dim)?;
        if x < 0.0 {
            return Err(self.err(
                field,
                Some(v.span()),
                format!("must be non-negative, got {}", v.get_ref()),
            ));
        }
        Ok(x)
    }

    fn positive(&self, field: &str, v: &Text, dim: Dimension) -> Result<f64, ConfigError> {
        let x = self.quantity(field, v, dim)?;
        if x <= 0.0 {
            return Err(self.err(field, Some(v.span()), format!("must be positive, got {}", v.get_ref())));
        }
        Ok(x)
    }

    fn count(&self, field: &str, v: &Option<Spanned<i64>>, default: usize, min: usize) -> Result<usize, ConfigError> {
        match v {
            None => Ok(default),
            Some(s) => {
                let n = *s.get_ref();
                if n < min as i64 {
                    Err(self.err(field, Some(s.span()), format!("must be at least {min}, got {n}")))
                } else {
                    Ok(n as usize)
                }
            }
        }
    }

    fn angles(&self, field: &str, v: &Spanned<Vec<Text>>) -> Result<Vec<f64>, ConfigError> {
        if v.get_ref().is_empty() {
            return Err(self.err(field, Some(v.span()), "list must not be empty"));
        }
        v.get_ref()
            .iter()
            .map(|a| parse_angle(a.get_ref()).map_err(|e| self.err(field, Some(a.span()), e.0)))
            .collect()
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        field: None,
        line: e.span().map(|s| line_of(text, s)),
        message: e.message().trim().to_string(),
    })?;
    let cx = Ctx { text };
    let defaults = NvSample::default();
    let c0 = PhysicalConstants::default();

    let sample = NvSample {
        b_ext: match &raw.sample.b_ext {
            Some(v) => cx.positive("sample.b_ext", v, Dimension::MagneticField)?,
            None => defaults.b_ext,
        },
        depth: match &raw.sample.depth {
            Some(v) => cx.positive("sample.depth", v, Dimension::Length)?,
            None => defaults.depth,
        },
        spin_density: match &raw.sample.spin_density {
            Some(v) => cx.positive("sample.spin_density", v, Dimension::NumberDensity)?,
            None => defaults.spin_density,
        },
        b_max: match &raw.sample.b_max {
            Some(v) => cx.non_negative("sample.b_max", v, Dimension::MagneticField)?,
            None => defaults.b_max,
        },
    };

    let constants = PhysicalConstants {
        gamma_e: cx.opt_quantity(
            "constants.gamma_e",
            &raw.constants.gamma_e,
            Dimension::GyromagneticRatio,
            c0.gamma_e,
        )?,
        gamma_n: cx.opt_quantity(
            "constants.gamma_n",
            &raw.constants.gamma_n,
            Dimension::GyromagneticRatio,
            c0.gamma_n,
        )?,
        zero_field_splitting: cx.opt_quantity(
            "constants.zero_field_splitting",
            &raw.constants.zero_field_splitting,
            Dimension::AngularFrequency,
            c0.zero_field_splitting,
        )?,
        ..c0
    };
    constants.validate().map_err(|e| ConfigError {
        field: Some("constants".into()),
        line: None,
        message: e.to_string(),
    })?;

    let timing = raw.timing.ok_or_else(|| ConfigError {
        field: Some("timing".into()),
        line: None,
        message: "missing required table [timing]".into(),
    })?;
    let tau = match &timing.tau {
        None => TauSetting::Auto,
        Some(v) if v.get_ref().trim() == "auto" => TauSetting::Auto,
        Some(v) => TauSetting::Fixed(cx.positive("timing.tau", v, Dimension::Time)?),
    };
    let t_p = match &timing.t_p {
        Some(v) => cx.non_negative("timing.t_p", v, Dimension::Time)?,
        None => return Err(cx.err("timing.t_p", None, "missing required field")),
    };
    let tau_corr = match &timing.tau_corr {
        Some(v) => {
            let spec = SweepSpec::parse(v.get_ref(), Dimension::Time)
                .map_err(|e| cx.err("timing.tau_corr", Some(v.span()), e.0))?;
            if spec.start < 0.0 {
                return Err(cx.err(
                    "timing.tau_corr",
                    Some(v.span()),
                    "correlation times must be non-negative",
                ));
            }
            spec
        }
        None => return Err(cx.err("timing.tau_corr", None, "missing required field")),
    };
    let idle_offset = match &timing.idle_offset {
        Some(v) => cx.non_negative("timing.idle_offset", v, Dimension::Time)?,
        None => 0.0,
    };

    let d = &raw.drive;
    let drive = match (&d.rabi, &d.rotation_angles) {
        (Some(_), Some(r)) => {
            return Err(cx.err(
                "drive",
                Some(r.span()),
                "give either `rabi` or `rotation_angles`, not both",
            ));
        }
        (Some(r), None) => {
            if r.get_ref().is_empty() {
                return Err(cx.err("drive.rabi", Some(r.span()), "list must not be empty"));
            }
            let v = r
                .get_ref()
                .iter()
                .map(|x| cx.non_negative("drive.rabi", x, Dimension::AngularFrequency))
                .collect::<Result<Vec<_>, _>>()?;
            DriveSweep::Rabi(v)
        }
        (None, Some(a)) => {
            let v = cx.angles("drive.rotation_angles", a)?;
            if let Some(bad) = v.iter().position(|x| *x < 0.0) {
                return Err(cx.err(
                    "drive.rotation_angles",
                    Some(a.get_ref()[bad].span()),
                    "rotation angles must be non-negative",
                ));
            }
            if t_p == 0.0 && v.iter().any(|x| *x != 0.0) {
                return Err(cx.err(
                    "drive.rotation_angles",
                    Some(a.span()),
                    "non-zero rotation angles need t_p > 0",
                ));
            }
            DriveSweep::RotationAngles(v)
        }
        (None, None) => DriveSweep::RotationAngles(vec![0.0]),
    };
    let phi_rf = match &d.phi_rf {
        Some(a) => cx.angles("drive.phi_rf", a)?,
        None => vec![0.0],
    };
    let misalignment = match &d.misalignment {
        Some(m) if !m.get_ref().is_finite() => {
            return Err(cx.err("drive.misalignment", Some(m.span()), "must be finite"))
        }
        Some(m) => *m.get_ref(),
        None => 0.0,
    };
    let vpp_map = match &d.vpp_slope {
        Some(s) => {
            let slope = cx.quantity("drive.vpp_slope", s, Dimension::AngularFrequency)?;
            if slope == 0.0 {
                return Err(cx.err("drive.vpp_slope", Some(s.span()), "slope must be non-zero"));
            }
            let intercept = cx.opt_quantity(
                "drive.vpp_intercept",
                &d.vpp_intercept,
                Dimension::AngularFrequency,
                0.0,
            )?;
            Some(VppMap { slope, intercept })
        }
        None => {
            if let Some(i) = &d.vpp_intercept {
                return Err(cx.err("drive.vpp_intercept", Some(i.span()), "vpp_intercept needs vpp_slope"));
            }
            None
        }
    };

    let e = &raw.engine;
    let kind = match &e.name {
        Some(n) => n
            .get_ref()
            .parse()
            .map_err(|m: String| cx.err("engine.name", Some(n.span()), m))?,
        None => Engine::ClosedForm,
    };
    let dg = EnsembleGrid::default();
    let og = OracleSettings::default();
    let engine = EngineSettings {
        kind,
        resolution: EnsembleResolution {
            phase_order: cx.count("engine.phase_order", &e.phase_order, DEFAULT_PHASE_ORDER, 2)?,
            grid: EnsembleGrid {
                n_alpha: cx.count("engine.n_alpha", &e.n_alpha, dg.n_alpha, 2)?,
                n_beta: cx.count("engine.n_beta", &e.n_beta, dg.n_beta, 5)?,
            },
        },
        oracle: OracleSettings {
            steps_per_period: cx.count(
                "engine.oracle_steps_per_period",
                &e.oracle_steps_per_period,
                DEFAULT_STEPS_PER_PERIOD,
                MIN_STEPS_PER_PERIOD,
            )?,
            grid: EnsembleGrid {
                n_alpha: cx.count("engine.oracle_n_alpha", &e.oracle_n_alpha, og.grid.n_alpha, 2)?,
                n_beta: cx.count("engine.oracle_n_beta", &e.oracle_n_beta, og.grid.n_beta, 5)?,
            },
        },
        monte_carlo_samples: cx.count("engine.monte_carlo_samples", &e.monte_carlo_samples, 0, 0)?,
    };

    Ok(ExperimentConfig {
        sample,
        constants,
        tau,
        t_p,
        tau_corr,
        idle_offset,
        drive,
        phi_rf,
        misalignment,
        vpp_map,
        engine,
        output: OutputSettings {
            dir: raw.output.dir.map(PathBuf::from),
            pl_sign: raw.output.pl_sign.unwrap_or(false),
        },
    })
}
