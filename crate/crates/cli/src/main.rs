//! `slangevin`: command-line driver for Langevin simulation, drift
//! verification, admissibility probes, control paths and diagnostics.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or usage: exit 1.
    Config(String),
    Io(String),
    /// A library operation failed: exit 2.
    Operation { op: &'static str, source: slangevin_core::Error },
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Operation { op, source } => write!(f, "{op} failed: {source}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Operation { source: slangevin_core::Error::Config(_), .. } => 1,
            CliError::Operation { .. } => 2,
        }
    }
}

/// Tags a library error with the operation that produced it.
pub fn op<T>(name: &'static str, r: slangevin_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Operation { op: name, source })
}

#[derive(Parser, Debug)]
#[command(name = "slangevin", version, about = "Underdamped Langevin dynamics with singular potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Run configuration (`section.key = value` lines).
    config: PathBuf,
    /// Override a configuration entry, e.g. `sde.seed=7` (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (beats `output.dir` and `SLANGEVIN_OUT`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate trajectories and write them as CSV or JSON.
    Simulate(Common),
    /// Select Lyapunov constants and check the drift inequality on fresh samples.
    VerifyDrift(Common),
    /// Probe the admissibility conditions of the potential.
    CheckAdmissible(Common),
    /// Build a control path between two phase points and re-integrate it.
    ControlPath(Common),
    /// Convergence diagnostics for a trajectory file.
    Diagnose(Common),
    /// Quadrature reference for the position marginal of the Gibbs measure.
    GibbsRef(Common),
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::VerifyDrift(c) => ("verify-drift", c),
        Command::CheckAdmissible(c) => ("check-admissible", c),
        Command::ControlPath(c) => ("control-path", c),
        Command::Diagnose(c) => ("diagnose", c),
        Command::GibbsRef(c) => ("gibbs-ref", c),
    };
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    let dir = match (&common.out, cfg.raw("output.dir"), std::env::var_os("SLANGEVIN_OUT")) {
        (Some(d), _, _) => d.clone(),
        (None, Some(d), _) => PathBuf::from(d),
        (None, None, Some(d)) => PathBuf::from(d),
        (None, None, None) => PathBuf::from("slangevin-out"),
    };
    let format: String = cfg.get("output.format")?;
    if format != "csv" && format != "json" {
        return Err(CliError::Config(format!("output.format must be csv or json, got `{format}`")));
    }
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let mut out = output::Artifacts::create(&dir)?;
    let passed = match cli.command {
        Command::Simulate(_) => commands::simulate(&cfg, &mut out)?,
        Command::VerifyDrift(_) => commands::verify_drift_cmd(&cfg, &mut out)?,
        Command::CheckAdmissible(_) => commands::check_admissible(&cfg, &mut out)?,
        Command::ControlPath(_) => commands::control_path(&cfg, &mut out)?,
        Command::Diagnose(_) => commands::diagnose(&cfg, &dir, &mut out)?,
        Command::GibbsRef(_) => commands::gibbs_ref(&cfg, &mut out)?,
    };
    out.write("resolved_config", &cfg.resolved())?;
    let dir = out.finish(name, if passed { "pass" } else { "fail" })?;
    eprintln!("{name}: {} (artifacts in {})", if passed { "pass" } else { "FAIL" }, dir.display());
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
