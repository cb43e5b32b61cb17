use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use muxfer::driver::{
    self, landau_zener_csv, EnergyGrid, GridCache, OutputFormat, RunConfig,
};
use muxfer::Error;

#[derive(Parser, Debug)]
#[command(name = "muxfer", version, about = "Muon transfer (p mu) + O -> p + (mu O) by hyperspherical close coupling")]
struct Cli {
    /// TOML run configuration; defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output file; standard output if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Adiabatic channel energies against the hyper-radius.
    Curves,
    /// Transfer probabilities over a grid of collision energies.
    Scan {
        /// `lo,hi,count` in eV (log-spaced).
        #[arg(long)]
        energies: Option<String>,
    },
    /// Landau-Zener, threshold-law and selection-rule comparisons.
    Models {
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        scan: PathBuf,
    },
    /// Sector-grid cache maintenance.
    Cache {
        #[arg(value_enum)]
        action: CacheAction,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CacheAction {
    Build,
    Verify,
    Clear,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) => 1,
        Error::Numerical(_) => 2,
        Error::Io { .. } | Error::Schema(_) | Error::Cache { .. } => 3,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(f) = cli.format {
        cfg.output.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Curves => {
            let text = driver::cmd_curves(&cfg)?;
            write_output(out, &text)?;
            if let Some(o) = out {
                write_output(Some(&sidecar_path(o)), &driver::sidecar(&cfg, None)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Scan { energies } => {
            if let Some(e) = energies {
                cfg.energies = EnergyGrid::parse(&e)?;
                cfg.validate()?;
            }
            let (result, text) = driver::cmd_scan(&cfg, cli.jobs)?;
            write_output(out, &text)?;
            if let Some(o) = out {
                write_output(Some(&sidecar_path(o)), &driver::sidecar(&cfg, Some(&result))?)?;
            }
            let worst = result.max_unitarity();
            if worst > cfg.tolerances.unitarity_ceiling {
                eprintln!(
                    "error: unitarity defect {worst:.3e} exceeds the ceiling {:.3e}",
                    cfg.tolerances.unitarity_ceiling
                );
                return Ok(ExitCode::from(2));
            }
            if result.failures() > 0 {
                eprintln!("error: {} of {} energies failed", result.failures(), result.rows.len());
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Models { curves, scan } => {
            let report = driver::cmd_models(&cfg, &read(&curves)?, &read(&scan)?)?;
            let text = match cfg.output.format {
                OutputFormat::Csv => landau_zener_csv(&report)?,
                OutputFormat::Json => driver::to_json(&report)?,
            };
            write_output(out, &text)?;
            if let (Some(o), OutputFormat::Csv) = (out, cfg.output.format) {
                write_output(Some(&sidecar_path(o)), &driver::to_json(&report)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Cache { action } => {
            let cache = GridCache::for_config(&cfg);
            match action {
                CacheAction::Build => {
                    let key = cfg.grid_key()?;
                    let grid = driver::build_grid(&cfg)?;
                    let path = cache.store(&key, &grid)?;
                    println!("built {key}: {} sectors at {}", grid.sectors.len(), path.display());
                }
                CacheAction::Verify => {
                    let r = cache.verify(&cfg, 1e-12)?;
                    println!(
                        "verified {}: sectors {:?}, max deviation {:.3e}",
                        r.key, r.checked, r.max_deviation
                    );
                }
                CacheAction::Clear => {
                    let removed = cache.clear()?;
                    for p in &removed {
                        println!("removed {}", p.display());
                    }
                    println!("{} entries removed from {}", removed.len(), cache.root().display());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
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
        Ok(code) => code,
        Err(e) => fail(e),
    }
}
