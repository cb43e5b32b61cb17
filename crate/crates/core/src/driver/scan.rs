//! Energy-resolved transfer probabilities.

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::basis::{BasisSettings, SectorGrid};
use crate::error::{Error, Result};
use crate::kinematics::SystemDefinition;
use crate::linalg::asymmetry;
use crate::matching::{
    entrance_threshold, enumerate_channels, extract_k, projection_matrices, reduce_to_open, s_from_k, unscale_k,
    transfer_probabilities, unitarity_defect, ChannelSpec, MatchingGrid,
};
use crate::models::j_distribution;
use crate::propagator::propagate;
use crate::units::ev_to_hartree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `max |S^+ S - I|` over the open channels.
    pub unitarity: f64,
    /// `||K - K^T|| / ||K||` of the open-channel K matrix.
    pub k_asymmetry: f64,
    /// Same measure for the log-derivative at the matching radius.
    pub z_asymmetry: f64,
    pub steps: usize,
    pub stabilizations: usize,
    pub open_channels: usize,
}

/// Transfer into one (mu O) shell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub n: u32,
    pub probability: f64,
    /// Probabilities of l = 0..n-1 (not normalized).
    pub by_l: Vec<f64>,
    /// Fine-structure populations j = 1/2..n-1/2, normalized within the
    /// shell; empty when nothing reaches it.
    pub by_j: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyResult {
    pub energy_ev: f64,
    pub total: f64,
    pub elastic: f64,
    pub excitation: f64,
    pub shells: Vec<Shell>,
    pub diagnostics: Diagnostics,
}

impl EnergyResult {
    pub fn shell(&self, n: u32) -> Option<&Shell> {
        self.shells.iter().find(|s| s.n == n)
    }
}

/// A row of a scan: a result or the reason it failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub energy_ev: f64,
    pub result: Option<EnergyResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub config_hash: String,
    pub shells: Vec<u32>,
    pub rows: Vec<ScanRow>,
}

impl ScanResult {
    pub fn max_unitarity(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| r.result.as_ref())
            .map(|r| r.diagnostics.unitarity)
            .fold(0.0, f64::max)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_none()).count()
    }
}

/// Propagation grid plus the energy-independent part of the matching.
pub struct Solver {
    pub config: RunConfig,
    pub sys: SystemDefinition,
    pub basis: BasisSettings,
    pub grid: SectorGrid,
    matching: MatchingGrid,
}

impl Solver {
    pub fn new(config: RunConfig, grid: SectorGrid) -> Result<Self> {
        config.validate()?;
        let sys = config.system()?;
        let basis = config.basis_settings()?;
        if grid.outer.channels() != basis.channels {
            return Err(Error::Config(format!(
                "grid carries {} channels, configuration selects {}",
                grid.outer.channels(),
                basis.channels
            )));
        }
        let matching = MatchingGrid::with_settings(&sys, &grid.outer, &config.matching);
        Ok(Solver { config, sys, basis, grid, matching })
    }

    pub fn channels(&self, energy: f64) -> Vec<ChannelSpec> {
        enumerate_channels(&self.sys, energy, &self.config.channels)
    }

    /// Full calculation at one collision energy (eV above the entrance
    /// threshold).
    pub fn solve(&self, collision_ev: f64) -> Result<EnergyResult> {
        if !(collision_ev > 0.0) || !collision_ev.is_finite() {
            return Err(Error::Domain(format!("collision energy must be positive, got {collision_ev}")));
        }
        let energy = entrance_threshold(&self.sys) + ev_to_hartree(collision_ev);
        let prop = propagate(&self.sys, &self.grid, energy, &self.config.propagation)?;
        let channels = self.channels(energy);
        let proj = projection_matrices(&self.sys, &self.matching, &channels, &self.config.matching)?;
        let k = unscale_k(&extract_k(&prop.z, &proj)?, &proj.log_scale);
        let open: Vec<bool> = channels.iter().map(|c| c.open).collect();
        let k_open = reduce_to_open(&k, &open)?;
        let s = s_from_k(&k_open)?;
        let open_channels: Vec<ChannelSpec> = channels.iter().filter(|c| c.open).cloned().collect();
        let tp = transfer_probabilities(&s, &open_channels)?;
        let unitarity = unitarity_defect(&s);
        let sel = &self.config.channels;
        let mut shells = Vec::new();
        for n in sel.muo_n_min..=sel.muo_n_max {
            let by_l: Vec<f64> = (0..n).map(|l| tp.partial.get(&(n, l)).copied().unwrap_or(0.0)).collect();
            let probability: f64 = by_l.iter().sum();
            let by_j = if probability > 0.0 { j_distribution(&by_l)? } else { Vec::new() };
            shells.push(Shell { n, probability, by_l, by_j });
        }
        let result = EnergyResult {
            energy_ev: collision_ev,
            total: tp.total,
            elastic: tp.elastic,
            excitation: tp.excitation,
            shells,
            diagnostics: Diagnostics {
                unitarity,
                k_asymmetry: asymmetry(&k_open),
                z_asymmetry: prop.z_asymmetry,
                steps: prop.steps,
                stabilizations: prop.stabilizations,
                open_channels: open_channels.len(),
            },
        };
        validate_result(&result)?;
        Ok(result)
    }

    /// Solves every energy on a pool of `jobs` threads (0: all cores);
    /// rows come back in input order and failures are recorded per row.
    pub fn scan(&self, energies: &[f64], jobs: usize) -> Result<ScanResult> {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        let rows = pool.install(|| {
            energies
                .par_iter()
                .map(|&e| match self.solve(e) {
                    Ok(r) => ScanRow { energy_ev: e, result: Some(r), error: None },
                    Err(err) => ScanRow { energy_ev: e, result: None, error: Some(err.to_string()) },
                })
                .collect()
        });
        let sel = &self.config.channels;
        Ok(ScanResult {
            config_hash: self.config.hash()?,
            shells: (sel.muo_n_min..=sel.muo_n_max).collect(),
            rows,
        })
    }
}

fn validate_result(r: &EnergyResult) -> Result<()> {
    let slack = r.diagnostics.unitarity + 1e-12;
    let mut all = vec![("total", r.total), ("elastic", r.elastic), ("excitation", r.excitation)];
    for s in &r.shells {
        all.push(("shell", s.probability));
        all.extend(s.by_l.iter().map(|p| ("partial", *p)));
    }
    for (name, p) in all {
        if !(p >= 0.0 && p <= 1.0 + slack) {
            return Err(Error::Numerical(format!("{name} probability {p} outside [0, 1]")));
        }
    }
    let sum = r.total + r.elastic + r.excitation;
    if sum > 1.0 + slack {
        return Err(Error::Numerical(format!("probabilities sum to {sum}")));
    }
    Ok(())
}

/// Column names of the scan table for the given shells.
pub fn scan_columns(shells: &[u32]) -> Vec<String> {
    let mut cols: Vec<String> = ["energy_ev", "status", "total", "elastic", "excitation"].map(String::from).to_vec();
    for &n in shells {
        cols.push(format!("p_n{n}"));
        for l in 0..n {
            cols.push(format!("p_n{n}_l{l}"));
        }
        for tj in (1..2 * n).step_by(2) {
            cols.push(format!("pj_n{n}_j{tj}/2"));
        }
    }
    for c in ["unitarity", "k_asymmetry", "z_asymmetry", "steps", "stabilizations", "open_channels", "error"] {
        cols.push(c.into());
    }
    cols
}

pub fn scan_record(shells: &[u32], row: &ScanRow) -> Vec<String> {
    let f = |v: f64| format!("{v:e}");
    let mut rec = vec![f(row.energy_ev)];
    match &row.result {
        Some(r) => {
            rec.extend(["ok".to_string(), f(r.total), f(r.elastic), f(r.excitation)]);
            for &n in shells {
                let sh = r.shell(n);
                rec.push(sh.map(|s| f(s.probability)).unwrap_or_default());
                for l in 0..n as usize {
                    rec.push(sh.and_then(|s| s.by_l.get(l)).map(|v| f(*v)).unwrap_or_default());
                }
                for j in 0..n as usize {
                    rec.push(sh.and_then(|s| s.by_j.get(j)).map(|v| f(*v)).unwrap_or_default());
                }
            }
            let d = &r.diagnostics;
            rec.extend([
                f(d.unitarity),
                f(d.k_asymmetry),
                f(d.z_asymmetry),
                d.steps.to_string(),
                d.stabilizations.to_string(),
                d.open_channels.to_string(),
                String::new(),
            ]);
        }
        None => {
            rec.push("failed".into());
            let blanks = scan_columns(shells).len() - 3;
            rec.extend(std::iter::repeat_n(String::new(), blanks));
            rec.push(row.error.clone().unwrap_or_default());
        }
    }
    rec
}
