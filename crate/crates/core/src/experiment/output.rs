//! Trace CSV files and the run-level JSON summary.
//!
//! Trace CSV:
//!
//! ```text
//! # format=nvcorr-trace/1
//! # phi_rf=0e0
//! # rabi=1.0471975511965977e5
//! # ...
//! tau_corr_s,signal
//! 6e-5,-2.0833...e9
//! ```
//!
//! Metadata lines are `# key=value`; numbers use the shortest
//! representation that parses back to the same `f64`, so a written trace
//! re-reads bit-exactly.
//!
//! `summary.json` holds `format`, `engine`, `omega`, `traces` (per-trace
//! file, metadata, fit, amplitude ratio), `reconciliation` (or null),
//! `warnings` and the `config` echo, in that order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::reconcile::ReconciliationReport;
use crate::experiment::sweep::{SweepResult, Trace, TraceSummary};

pub const TRACE_FORMAT: &str = "nvcorr-trace/1";
pub const SUMMARY_FORMAT: &str = "nvcorr-summary/1";
pub const CSV_HEADER: &str = "tau_corr_s,signal";

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), num)
}

pub fn trace_to_csv(trace: &Trace) -> String {
    let m = &trace.meta;
    let mut s = String::new();
    let meta: [(&str, String); 16] = [
        ("format", TRACE_FORMAT.to_string()),
        ("engine", m.engine.name().to_string()),
        ("phi_rf", num(m.phi_rf)),
        ("rabi", num(m.rabi)),
        ("rotation_angle", num(m.rotation_angle)),
        ("omega_x", num(m.omega_x)),
        ("omega_y", num(m.omega_y)),
        ("omega", num(m.omega)),
        ("tau", num(m.tau)),
        ("t_p", num(m.t_p)),
        ("idle_offset", num(m.idle_offset)),
        ("prefactor", num(m.prefactor)),
        ("rf_start_phase", num(m.rf_start_phase)),
        ("vpp", opt(m.vpp)),
        ("convention", m.convention.clone()),
        ("warnings", trace.warnings.len().to_string()),
    ];
    for (k, v) in meta {
        let _ = writeln!(s, "# {k}={v}");
    }
    s.push_str(CSV_HEADER);
    s.push('\n');
    for (t, y) in trace.tau_corr.iter().zip(&trace.signal) {
        let _ = writeln!(s, "{},{}", num(*t), num(*y));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrace {
    pub metadata: BTreeMap<String, String>,
    pub tau_corr: Vec<f64>,
    pub signal: Vec<f64>,
}

impl CsvTrace {
    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.metadata.get(key).and_then(|v| v.parse().ok())
    }
}

pub fn parse_trace_csv(text: &str, path: &Path) -> Result<CsvTrace> {
    let bad = |line: usize, reason: String| Error::TraceFormat {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let mut metadata = BTreeMap::new();
    let mut tau_corr = Vec::new();
    let mut signal = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest
                .trim()
                .split_once('=')
                .ok_or_else(|| bad(n, format!("metadata line '{line}' is not key=value")))?;
            metadata.insert(k.trim().to_string(), v.trim().to_string());
            continue;
        }
        if !header_seen {
            if line != CSV_HEADER {
                return Err(bad(n, format!("expected header '{CSV_HEADER}', found '{line}'")));
            }
            header_seen = true;
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| bad(n, "expected two comma-separated columns".into()))?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(n, format!("'{s}': {e}")));
        tau_corr.push(parse(a)?);
        signal.push(parse(b)?);
    }
    if !header_seen {
        return Err(bad(0, format!("missing header '{CSV_HEADER}'")));
    }
    Ok(CsvTrace {
        metadata,
        tau_corr,
        signal,
    })
}

pub fn read_trace_csv(path: &Path) -> Result<CsvTrace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace_csv(&text, path)
}

#[derive(Debug, Serialize)]
struct SummaryTrace<'a> {
    file: String,
    #[serde(flatten)]
    summary: &'a TraceSummary,
    warnings: &'a [String],
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    format: &'static str,
    engine: &'static str,
    omega: f64,
    traces: Vec<SummaryTrace<'a>>,
    reconciliation: Option<&'a ReconciliationReport>,
    warnings: Vec<String>,
    config: &'a ExperimentConfig,
}

pub fn trace_file_name(index: usize) -> String {
    format!("trace_{index:03}.csv")
}

pub fn summary_json(
    result: &SweepResult,
    config: &ExperimentConfig,
    report: Option<&ReconciliationReport>,
) -> Result<String> {
    let traces = result
        .summaries
        .iter()
        .zip(&result.traces)
        .map(|(s, t)| SummaryTrace {
            file: trace_file_name(s.index),
            summary: s,
            warnings: &t.warnings,
        })
        .collect();
    let mut warnings = Vec::new();
    for t in &result.traces {
        for w in &t.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
    }
    let summary = Summary {
        format: SUMMARY_FORMAT,
        engine: config.engine.kind.name(),
        omega: config.larmor()?,
        traces,
        reconciliation: report,
        warnings,
        config,
    };
    let mut text =
        serde_json::to_string_pretty(&summary).map_err(|e| Error::domain(format!("cannot serialise summary: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Writes one CSV per trace and `summary.json` into `dir`, returning the
/// written paths in order.
pub fn write_outputs(
    dir: &Path,
    result: &SweepResult,
    config: &ExperimentConfig,
    report: Option<&ReconciliationReport>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(result.traces.len() + 1);
    for (i, t) in result.traces.iter().enumerate() {
        let path = dir.join(trace_file_name(i));
        fs::write(&path, trace_to_csv(t)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("summary.json");
    fs::write(&path, summary_json(result, config, report)?).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::parse_config;
    use crate::experiment::sweep::run_sweep;

    fn sample() -> (ExperimentConfig, SweepResult) {
        let c = parse_config(
            "[timing]\nt_p = \"30 us\"\ntau_corr = \"60us:63us:11\"\n[drive]\nrotation_angles = [\"0\", \"pi\"]\nphi_rf = [\"pi/4\"]\n",
        )
        .unwrap();
        let r = run_sweep(&c, 1, 0).unwrap();
        (c, r)
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let (_, r) = sample();
        for t in &r.traces {
            let back = parse_trace_csv(&trace_to_csv(t), Path::new("mem")).unwrap();
            assert_eq!(back.tau_corr, t.tau_corr);
            assert_eq!(back.signal, t.signal);
            assert_eq!(back.meta_f64("omega"), Some(t.meta.omega));
            assert_eq!(back.metadata["engine"], "closed-form");
        }
    }

    #[test]
    fn csv_errors_carry_path_and_line() {
        let e = parse_trace_csv("tau_corr_s,signal\n1e-6,abc\n", Path::new("x.csv")).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("x.csv") && msg.contains("line 2"), "{msg}");
        assert!(parse_trace_csv("# a=b\n1,2\n", Path::new("y.csv")).is_err());
    }

    #[test]
    fn summary_has_documented_keys_in_order() {
        let (c, r) = sample();
        let text = summary_json(&r, &c, None).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        for k in [
            "format",
            "engine",
            "omega",
            "traces",
            "reconciliation",
            "warnings",
            "config",
        ] {
            assert!(keys.contains(&k), "{k} missing");
        }
        let fmt_pos = text.find("\"format\"").unwrap();
        let cfg_pos = text.rfind("\"config\"").unwrap();
        assert!(fmt_pos < cfg_pos);
        let t0 = &v["traces"][0];
        for k in ["file", "index", "meta", "fit", "ratio"] {
            assert!(t0.get(k).is_some(), "trace key {k} missing");
        }
        assert_eq!(v["format"], SUMMARY_FORMAT);
    }

    #[test]
    fn write_outputs_creates_files() {
        let (c, r) = sample();
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(dir.path(), &r, &c, None).unwrap();
        assert_eq!(files.len(), 3);
        let back = read_trace_csv(&files[1]).unwrap();
        assert_eq!(back.signal, r.traces[1].signal);
    }

    #[test]
    fn unwritable_directory_reports_path() {
        let (c, r) = sample();
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = write_outputs(&blocker.join("sub"), &r, &c, None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("file"));
    }
}
