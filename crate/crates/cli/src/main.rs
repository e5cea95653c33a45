use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hardy_cli::config::{Overrides, RunConfig};
use hardy_cli::{run, tables, CliError, RunReport, Subcommand, EXIT_INVARIANT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Numerical experiments on interpolating sequences in Hardy spaces.
///
/// Exit codes: 0 success, 2 configuration error, 3 capacity exceeded,
/// 4 numerical failure, 5 invariant violation.
#[derive(Debug, Parser)]
#[command(name = "hardy-lab", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every stochastic step; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Quadrature resolution (cap for adaptive steps); overrides the config.
    #[arg(long)]
    resolution: Option<usize>,
    /// Write `<subcommand>.json` and any CSV tables here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// What to print on stdout when --out is absent.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn emit(report: &RunReport, out: Option<&Path>, format: Format) -> Result<(), CliError> {
    let tables = tables(report);
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_owned(), source })?;
            write(&dir.join(format!("{}.json", report.subcommand.name())), &report.to_json())?;
            for t in &tables {
                write(&dir.join(format!("{}.csv", t.name)), &t.to_csv())?;
            }
        }
        None if format == Format::Json => print!("{}", report.to_json()),
        None => {
            if tables.is_empty() {
                return Err(CliError::Config(format!(
                    "{} has no tabular output; use --format json",
                    report.subcommand.name()
                )));
            }
            for t in &tables {
                print!("{}", t.to_csv());
            }
        }
    }
    Ok(())
}

fn main_inner(args: &Args) -> Result<RunReport, CliError> {
    let cfg = match &args.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    let settings = cfg.resolve(Overrides { seed: args.seed, resolution: args.resolution })?;
    let report = run(args.subcommand, settings)?;
    emit(&report, args.out.as_deref(), args.format)?;
    Ok(report)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(report) if report.invariants_hold() => ExitCode::SUCCESS,
        Ok(report) => {
            for c in report.invariants.iter().filter(|c| !c.holds) {
                eprintln!("hardy-lab: invariant violated: {}", c.name);
            }
            ExitCode::from(EXIT_INVARIANT)
        }
        Err(e) => {
            eprintln!("hardy-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
