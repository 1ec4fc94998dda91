use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use nvcorr::experiment::output::{trace_to_csv, write_outputs};
use nvcorr::experiment::reconcile::{run_validation, sweep_reconciliation, ValidationSettings};
use nvcorr::experiment::sweep::{run_sweep, SweepResult};
use nvcorr::experiment::{fit_sinusoid, read_trace_csv, Engine, ExperimentConfig};
use nvcorr::field::hemisphere_integral;
use nvcorr::units::{parse_quantity, Dimension};
use nvcorr::{Error, Result};

#[derive(Parser)]
#[command(
    name = "nvcorr",
    version,
    about = "NV correlation spectroscopy under RF control of nuclear spin noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// closed-form, quadrature or oracle; overrides the config.
    #[arg(long)]
    engine: Option<Engine>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for Monte-Carlo averaging.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// One trace: the first drive setting and first phi_rf of the config.
    Simulate(RunArgs),
    /// Every (phi_rf, drive) trace of the config.
    Sweep(RunArgs),
    /// Fit a trace CSV at the Larmor frequency.
    Fit {
        trace: PathBuf,
        /// Angular frequency in any frequency unit; defaults to the
        /// trace's `omega` metadata.
        #[arg(long)]
        omega: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Run the reconciliation suite.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        /// Directory for reconciliation.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hemisphere coupling integrals.
    Geometry {
        #[arg(long, default_value = "5 nm")]
        depth: String,
        #[arg(long, default_value_t = 16)]
        order: usize,
        #[arg(long)]
        json: bool,
    },
}

fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(e) = args.engine {
        config.engine.kind = e;
    }
    if let Some(dir) = &args.out {
        config.output.dir = Some(dir.clone());
    }
    Ok(config)
}

fn emit(config: &ExperimentConfig, result: &SweepResult) -> Result<()> {
    let report = sweep_reconciliation(result, config);
    match &config.output.dir {
        Some(dir) => {
            let files = write_outputs(dir, result, config, report.as_ref())?;
            println!("wrote {} files to {}", files.len(), dir.display());
        }
        None => {
            for t in &result.traces {
                print!("{}", trace_to_csv(t));
            }
        }
    }
    for s in &result.summaries {
        let ratio = s
            .ratio
            .map(|r| format!("in-phase {:+.6}  quadrature {:.6}", r.in_phase, r.quadrature))
            .unwrap_or_else(|| "no ratio".into());
        eprintln!(
            "trace {:03}  phi_rf {:.4}  rabi {:.4e} rad/s  {}",
            s.index, s.meta.phi_rf, s.meta.rabi, ratio
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(args) => {
            let config = load(&args)?.single_trace();
            emit(&config, &run_sweep(&config, args.workers, args.seed)?)?;
        }
        Command::Sweep(args) => {
            let config = load(&args)?;
            emit(&config, &run_sweep(&config, args.workers, args.seed)?)?;
        }
        Command::Fit { trace, omega, json } => {
            let t = read_trace_csv(&trace)?;
            let omega = match omega {
                Some(text) => parse_quantity(&text, Dimension::AngularFrequency).map_err(|e| Error::Domain(e.0))?,
                None => t.meta_f64("omega").ok_or_else(|| Error::TraceFormat {
                    path: trace.clone(),
                    reason: "no omega metadata; pass --omega".into(),
                })?,
            };
            let f = fit_sinusoid(&t.tau_corr, &t.signal, omega)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&f).expect("fit serialises"));
            } else {
                println!("a          {:+.9e}", f.a);
                println!("b          {:+.9e}", f.b);
                println!("c          {:+.9e}", f.c);
                println!("amplitude  {:.9e}", f.amplitude);
                println!("phase      {:+.9} rad", f.phase);
                println!("rms        {:.3e}", f.rms_residual);
                println!("condition  {:.3e}", f.condition);
            }
        }
        Command::Validate { seed, draws, out } => {
            let report = run_validation(ValidationSettings {
                phase_draws: draws,
                ensemble_draws: (draws / 5).max(1),
                seed,
            })?;
            println!("{report}");
            if let Some(dir) = out {
                write_report(&dir, &report)?;
            }
            return Ok(report.passed);
        }
        Command::Geometry { depth, order, json } => {
            let d = parse_quantity(&depth, Dimension::Length).map_err(|e| Error::Domain(e.0))?;
            let g = hemisphere_integral(d, order)?;
            if json {
                let v = json!({
                    "depth": g.depth, "order": g.order,
                    "i_x": g.i_x, "i_y": g.i_y, "i_f": g.i_f,
                    "error": g.error, "converged": g.converged,
                });
                println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            } else {
                println!("{:>14} {:>14} {:>14} {:>14}", "I_x", "I_y", "I_f", "error");
                println!("{:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}", g.i_x, g.i_y, g.i_f, g.error);
                if !g.converged {
                    eprintln!("warning: I_f not converged at order {order}");
                }
            }
        }
    }
    Ok(true)
}

fn write_report(dir: &Path, report: &nvcorr::experiment::ReconciliationReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })?;
    let path = dir.join("reconciliation.json");
    let text = serde_json::to_string_pretty(report).expect("report serialises") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
