use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decoherence_core::config::ExperimentConfig;
use decoherence_core::experiment::{run_check, run_evolve, run_pointer, run_wigner, Report, Table};
use decoherence_core::Error;
use tempfile::NamedTempFile;

/// Runs decoherence experiments described by a TOML file.
#[derive(Debug, Parser)]
#[command(name = "decolab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expectation deficits of an evolving state.
    Evolve(Common),
    /// Pointer basis of the equilibrium state and its classical ensemble.
    Pointer(Common),
    /// Phase-space experiments on the delta well.
    Wigner(Common),
    /// Seeded property suite.
    Check(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output` from the config, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidParameter { .. }
            | Error::Shape(_)
            | Error::GridMismatch
            | Error::TailMass { .. }
            | Error::Resolution { .. }
            | Error::Unresolved { .. } => Failure::Validation(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn io(e: impl std::fmt::Display) -> Failure {
    Failure::Numerical(format!("writing output: {e}"))
}

/// Writes through a temporary file in `dir` and renames it into place.
fn write_atomic(dir: &Path, name: &str, fill: impl FnOnce(&mut NamedTempFile) -> std::io::Result<()>) -> Result<(), Failure> {
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    fill(&mut tmp).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644)).map_err(io)?;
    }
    tmp.persist(dir.join(name)).map_err(io)?;
    Ok(())
}

fn write_table(dir: &Path, t: &Table) -> Result<(), Failure> {
    write_atomic(dir, &format!("{}.csv", t.file), |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(&t.header)?;
        for row in &t.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()
    })
}

fn write_report(dir: &Path, report: &Report) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(io)?;
    for t in &report.tables {
        write_table(dir, t)?;
    }
    let text = toml::to_string(report).map_err(io)?;
    write_atomic(dir, "summary.toml", |f| f.write_all(text.as_bytes()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (common, runner): (&Common, fn(&ExperimentConfig) -> decoherence_core::Result<Report>) = match &cli.command {
        Command::Evolve(c) => (c, run_evolve),
        Command::Pointer(c) => (c, run_pointer),
        Command::Wigner(c) => (c, run_wigner),
        Command::Check(c) => (c, run_check),
    };
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Failure::Validation(format!("reading {}: {e}", common.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let dir = common.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let report = runner(&cfg)?;
    write_report(&dir, &report)?;
    for c in &report.checks {
        println!("{} {}: {:e} (limit {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
    }
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("failed checks: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("invalid input: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
