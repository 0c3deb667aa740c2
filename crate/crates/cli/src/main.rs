#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use error::CliError;

/// Classical scattering relations and semiclassical amplitudes.
#[derive(Parser)]
#[command(name = "scatrel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and record its samples.
    Trace(Io),
    /// Tabulate the impact map and angular density over a grid (CSV).
    Relation(Io),
    /// Find every trajectory from θ to ω (JSON).
    Solve(Io),
    /// Semiclassical amplitude at one (ω, h) (JSON) or over a fan (CSV).
    Amplitude(Io),
    /// Run invariant suites; exit 1 if any fails.
    Check(Io),
}

#[derive(clap::Args)]
struct Io {
    #[arg(long)]
    config: PathBuf,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SCATREL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config { line: 0, message: format!("SCATREL_THREADS must be a positive integer (got `{raw}`)") })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|()| out.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let (cmd, io) = match &cli.command {
        Command::Trace(io) => ("trace", io),
        Command::Relation(io) => ("relation", io),
        Command::Solve(io) => ("solve", io),
        Command::Amplitude(io) => ("amplitude", io),
        Command::Check(io) => ("check", io),
    };
    let src = fs::read_to_string(&io.config)
        .map_err(|e| CliError::Config { line: 0, message: format!("{}: {e}", io.config.display()) })?;
    let cfg = config::load(&src)?;
    let text = match cmd {
        "trace" => commands::trace(&cfg)?,
        "relation" => commands::relation(&cfg)?,
        "solve" => commands::solve(&cfg)?,
        "amplitude" => commands::amplitude(&cfg)?,
        _ => {
            let (report, failed) = commands::check(&cfg)?;
            write_out(io.out.as_deref(), &report)?;
            return if failed.is_empty() { Ok(()) } else { Err(CliError::Invariant(failed)) };
        }
    };
    write_out(io.out.as_deref(), &text)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scatrel: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
