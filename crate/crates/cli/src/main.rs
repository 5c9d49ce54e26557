//! Command-line driver: identity suite, asymptotic flow, evolution, manufactured
//! solutions and post-processing of run directories.

mod config;
mod error;
mod evolve;
mod flow;
mod io;
mod mms;
mod report;
mod verify;

use clap::{Parser, Subcommand};
use config::{Loaded, ModeName};
use error::{CliError, CliResult};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "scri", version, about = "Conformal-Fuchsian pipeline for semilinear wave equations near null infinity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (the run directory for `report`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every sampling-based step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Angular treatment of the grid.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Identity suite over geometry, coefficients and the symmetrized system.
    Verify,
    /// Boundedness of the asymptotic flow at one point.
    Flow,
    /// Evolve physical data toward t = 0 with energy monitoring.
    Evolve,
    /// Manufactured-solution convergence study.
    Mms,
    /// Decay fits, energy constant and residuals of an evolve run directory.
    Report,
}

fn load(cli: &Cli) -> CliResult<Loaded> {
    let mut l = match (&cli.config, cli.command, &cli.out) {
        (None, Command::Report, Some(dir)) => Loaded::from_file(Some(&dir.join("config.toml")))?,
        (c, _, _) => Loaded::from_file(c.as_deref())?,
    };
    if let Some(s) = cli.seed {
        l.cfg.solver.seed = s;
    }
    if let Some(m) = cli.mode {
        l.cfg.grid.mode = m;
    }
    if let Some(o) = &cli.out {
        l.cfg.output.dir = o.clone();
    }
    Ok(l)
}

fn execute(cli: &Cli) -> CliResult<()> {
    let l = load(cli)?;
    let out: &Path = &l.cfg.output.dir;
    if cli.command == Command::Report {
        if !out.join("run.json").is_file() {
            return Err(CliError::Config(format!("{} is not an evolve run directory", out.display())));
        }
    } else {
        std::fs::create_dir_all(out)?;
        let text = toml::to_string(&l.effective()).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(out.join("config.toml"), text)?;
    }
    match cli.command {
        Command::Verify => verify::run(&l, out).map(drop),
        Command::Flow => flow::run(&l, out).map(drop),
        Command::Evolve => evolve::run(&l, out).map(drop),
        Command::Mms => mms::run(&l, out).map(drop),
        Command::Report => report::run(&l, out).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scri: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
