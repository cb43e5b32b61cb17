//! Orchestration behind the command-line interface: configuration, the
//! sector-grid cache, energy scans, curve tables and model comparisons.

mod cache;
mod config;
mod curves;
mod report;
mod scan;

pub use cache::{build_grid, GridCache, VerifyReport};
pub use config::{
    BasisConfig, CacheConfig, CurveConfig, EnergyGrid, OutputConfig, OutputFormat, RunConfig, SystemConfig,
    Tolerances, CACHE_ENV,
};
pub use curves::{compute_curves, curves_to_csv, parse_curves, read_curves};
pub use report::{landau_zener_csv, model_report, parse_scan_table, read_scan_table, ModelReport, ScanTable};
pub use scan::{scan_columns, scan_record, Diagnostics, EnergyResult, ScanResult, ScanRow, Shell, Solver};

use crate::error::{Error, Result};

/// Solver for `cfg`, loading or building its grid through the cache.
pub fn solver(cfg: &RunConfig) -> Result<Solver> {
    let grid = GridCache::for_config(cfg).grid(cfg)?;
    Solver::new(cfg.clone(), grid)
}

pub fn cmd_curves(cfg: &RunConfig) -> Result<String> {
    let sys = cfg.system()?;
    let grid = GridCache::for_config(cfg).grid(cfg)?;
    let table = compute_curves(&sys, &grid, cfg.curves.points_per_sector);
    match cfg.output.format {
        OutputFormat::Csv => curves_to_csv(&sys, &table),
        OutputFormat::Json => to_json(&table),
    }
}

/// Runs the scan and renders it; the caller decides the exit status from
/// the returned result.
pub fn cmd_scan(cfg: &RunConfig, jobs: usize) -> Result<(ScanResult, String)> {
    let energies = cfg.energies.values();
    let result = if energies.is_empty() {
        ScanResult {
            config_hash: cfg.hash()?,
            shells: (cfg.channels.muo_n_min..=cfg.channels.muo_n_max).collect(),
            rows: Vec::new(),
        }
    } else {
        solver(cfg)?.scan(&energies, jobs)?
    };
    let text = render_scan(&result, cfg.output.format)?;
    Ok((result, text))
}

pub fn render_scan(result: &ScanResult, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => to_json(result),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(scan_columns(&result.shells)).map_err(curves::csv_err)?;
            for row in &result.rows {
                w.write_record(scan_record(&result.shells, row)).map_err(curves::csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
        }
    }
}

/// JSON sidecar written next to table outputs.
pub fn sidecar(cfg: &RunConfig, result: Option<&ScanResult>) -> Result<String> {
    let mut doc = serde_json::json!({
        "config_hash": cfg.hash()?,
        "grid_key": cfg.grid_key()?,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "energy_origin": "entrance threshold (p mu)1s + O, eV",
    });
    if let Some(r) = result {
        doc["diagnostics"] = serde_json::json!({
            "rows": r.rows.len(),
            "failures": r.failures(),
            "max_unitarity": r.max_unitarity(),
            "unitarity_ceiling": cfg.tolerances.unitarity_ceiling,
        });
    }
    to_json(&doc)
}

pub fn cmd_models(cfg: &RunConfig, curves_text: &str, scan_text: &str) -> Result<ModelReport> {
    let sys = cfg.system()?;
    let curves = parse_curves(&sys, curves_text)?;
    let scan = parse_scan_table(scan_text)?;
    model_report(&sys, &curves, &scan)
}

pub fn to_json<T: serde::Serialize + ?Sized>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
