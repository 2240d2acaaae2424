mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rydpair::radial::Method;
use rydpair::Error;

#[derive(Parser)]
#[command(name = "rydpair", version, about = "Rydberg pair potentials, Stark maps and Zeeman maps")]
struct Cli {
    /// Species data file; the bundled data is used when absent.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Radial matrix element cache file.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Radial integration method: `numerov` or `whittaker`.
    #[arg(long, global = true, default_value = "numerov", value_parser = parse_method)]
    method: Method,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set fields.efield_mV_per_cm=[0,0,34.3]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Pair potential curves around a target pair state.
    PairPotential(RunArgs),
    /// Single-atom energies versus electric field.
    StarkMap(RunArgs),
    /// Single-atom energies versus magnetic field.
    ZeemanMap(RunArgs),
    /// One radial integral and multipole matrix element.
    MatrixElement(commands::ElementArgs),
    /// Energy, quantum defect and size of a level.
    StateInfo(commands::StateArgs),
    /// Inspect or clear the matrix element cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    /// Print the cache path, stamp and entry count.
    Inspect,
    /// Remove every cached entry.
    Clear,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Result of a command that may have produced partial output.
pub enum Outcome {
    Done,
    Partial(usize),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidState(_) | Error::UnknownSpecies(_) => 2,
        Error::Domain(_) | Error::Numerical(_) => 3,
        Error::DataFile(_) | Error::Cache(_) | Error::Io(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    let ctx = commands::Context { data: cli.data, cache: cli.cache, method: cli.method };
    let result = match cli.command {
        Command::PairPotential(a) => commands::pair_potential(&ctx, &a),
        Command::StarkMap(a) => commands::field_map(&ctx, &a, rydpair::fields::FieldKind::Electric),
        Command::ZeemanMap(a) => commands::field_map(&ctx, &a, rydpair::fields::FieldKind::Magnetic),
        Command::MatrixElement(a) => commands::matrix_element(&ctx, &a),
        Command::StateInfo(a) => commands::state_info(&ctx, &a),
        Command::Cache { action: CacheAction::Inspect } => commands::cache(&ctx, false),
        Command::Cache { action: CacheAction::Clear } => commands::cache(&ctx, true),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(n)) => {
            eprintln!("error: {n} point(s) failed; see run.json");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
