//! Command-line front end: `band`, `solve`, `validate` and `sweep`.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! failures and 1 for I/O problems.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use blochwave::pipeline::{run_band, run_solve, run_sweep, run_validate};
use blochwave::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "blochwave", version, about = "Bloch-wave enriched FEM for periodic wave-guides")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults are used for missing keys or when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the damping δ (for `sweep`: run this single value).
    #[arg(long, global = true)]
    delta: Option<f64>,

    /// Worker threads for the band sampling.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Band samples and the selected outgoing modes.
    Band,
    /// Full scattering solve: field, selected modes and report.
    Solve,
    /// Reflection and transmission against the Fresnel reference.
    Validate,
    /// Fresnel errors over the configured damping values.
    Sweep,
}

/// Marks failures of the command line itself as configuration errors.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(delta) = cli.delta {
        cfg.delta = delta;
        if matches!(cli.command, Command::Sweep) {
            cfg.deltas = vec![delta];
        }
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| UsageError(format!("cannot start {n} threads: {e}")))?;
    }
    let cfg = load_config(cli)?;
    let out = &cli.out;
    log::info!("{:?} -> {}", cli.command, out.display());
    let summary = match cli.command {
        Command::Band => serde_json::to_value(run_band(&cfg, out)?)?,
        Command::Solve => serde_json::to_value(run_solve(&cfg, out)?)?,
        Command::Validate => serde_json::to_value(run_validate(&cfg, out)?)?,
        Command::Sweep => serde_json::to_value(run_sweep(&cfg, out)?)?,
    };
    let text = serde_json::to_string_pretty(&summary).context("formatting summary")?;
    println!("{text}");
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<blochwave::Error>() {
        Some(e) if e.is_config() => 2,
        Some(blochwave::Error::Io(_) | blochwave::Error::Csv(_)) => 1,
        Some(_) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&blochwave::Error::Config("x".into()).into()), 2);
        assert_eq!(exit_code(&blochwave::Error::Residual(1.0).into()), 3);
        assert_eq!(exit_code(&blochwave::Error::Evanescent.into()), 3);
        assert_eq!(exit_code(&UsageError("x".into()).into()), 2);
        let io = std::io::Error::other("disk");
        assert_eq!(exit_code(&blochwave::Error::Io(io).into()), 1);
    }

    #[test]
    fn sweep_delta_override() {
        let cli = Cli::parse_from(["blochwave", "sweep", "--delta", "1e-3"]);
        let cfg = load_config(&cli).unwrap();
        assert_eq!(cfg.deltas, vec![1e-3]);
        assert_eq!(cfg.delta, 1e-3);
    }
}
