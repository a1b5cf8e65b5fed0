use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sobolev_cd::reporting::{run, Command, Overrides, RunConfig, RunError};

/// Reproducible experiments on curvature-dimension model spaces.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// One of: verify-cd, bochner, sobolev-deficit, extremal-sweep, minimize,
    /// rigidity-scan, critical-limit, flow-fd, flow-fast-diffusion,
    /// entropy-inequality, full-suite.
    #[arg(value_parser = parse_command)]
    command: Command,
    /// JSON run configuration; optional for commands whose defaults suffice.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Corpus seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Grid resolution (overrides `space.resolution`).
    #[arg(long)]
    resolution: Option<usize>,
    /// Record wall-clock time in the manifest.
    #[arg(long)]
    timestamp: bool,
}

fn parse_command(s: &str) -> Result<Command, String> {
    Command::parse(s).ok_or_else(|| {
        let names: Vec<_> = Command::ALL.iter().map(|c| c.as_str()).collect();
        format!("unknown command `{s}` (expected one of {})", names.join(", "))
    })
}

fn load(cli: &Cli) -> Result<RunConfig, RunError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Io(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text).map_err(|e| {
                let msg = match e {
                    sobolev_cd::Error::InvalidConfig(m) => m,
                    other => other.to_string(),
                };
                RunError::Config(format!("{}: {msg}", path.display()))
            })?
        }
        None => RunConfig::for_command(cli.command),
    };
    match config.command {
        Some(c) if c != cli.command => {
            return Err(RunError::Config(format!("config is for `{c}` but `{}` was requested", cli.command)))
        }
        _ => config.command = Some(cli.command),
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        output_dir: cli.out.clone(),
        seed: cli.seed,
        resolution: cli.resolution,
        timestamp: cli.timestamp,
    };
    let result = load(&cli).and_then(|config| {
        let out_dir = overrides.output_dir.clone().unwrap_or_else(|| config.output_dir.clone());
        run(&config, &overrides).map(|m| (m, out_dir))
    });
    match result {
        Ok((manifest, out_dir)) => {
            for c in &manifest.checks {
                println!("{} {}: measured {:e}, tolerance {:e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured, c.tolerance);
            }
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("manifest: {}", out_dir.join("manifest.json").display());
            ExitCode::from(manifest.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
