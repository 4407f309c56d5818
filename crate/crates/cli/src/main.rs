mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{load, BulkConfig, EvolveConfig, ExistConfig, MatchConfig, SpectrumConfig};
use crate::error::CliError;

/// Edge states of generalized honeycomb interfaces.
#[derive(Debug, Parser)]
#[command(name = "edgelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// spectrum: exit with status 3 unless the spectrum crosses zero at k = 0.
    #[arg(long, global = true)]
    require_crossing: bool,

    /// Overrides `n_cells` (supercell half width).
    #[arg(long, global = true)]
    n_cells: Option<usize>,

    /// Overrides `k_points`.
    #[arg(long, global = true)]
    k_points: Option<usize>,

    /// Reserved; every computation is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Supercell spectrum over k with boundary filtering.
    Spectrum,
    /// Matching interface coupling of a type-I interface, confirmed by a supercell run.
    MatchC,
    /// Existence of zero-energy edge states at k = 0.
    Exist,
    /// Wavepacket evolution along a straight or bent interface.
    Evolve,
    /// Bulk bands, zone-center spectrum, Dirac cone and band inversion.
    Bulk,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("EDGELAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::config(format!("EDGELAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot size thread pool: {e}")))
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    let cfg_path = cli.config.as_deref();
    let out: &Path = &cli.out;
    std::fs::create_dir_all(out)?;
    match cli.command {
        Command::Spectrum => {
            let mut cfg: SpectrumConfig = load(cfg_path)?;
            cfg.n_cells = cli.n_cells.unwrap_or(cfg.n_cells);
            cfg.k_points = cli.k_points.unwrap_or(cfg.k_points);
            commands::spectrum(&mut cfg, out, cli.require_crossing)
        }
        Command::MatchC => {
            let mut cfg: MatchConfig = load(cfg_path)?;
            cfg.n_cells = cli.n_cells.unwrap_or(cfg.n_cells);
            commands::match_c(&cfg, out)
        }
        Command::Exist => commands::exist(&load::<ExistConfig>(cfg_path)?, out),
        Command::Evolve => commands::evolve(&mut load::<EvolveConfig>(cfg_path)?, out),
        Command::Bulk => commands::bulk(&load::<BulkConfig>(cfg_path)?, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
