//! On-disk cache of sector grids, keyed by the configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::basis::{build_sector_basis, build_sector_grid, SectorBasis, SectorGrid};
use crate::error::{Error, Result};

const PREFIX: &str = "grid-";
const SUFFIX: &str = ".bin";

pub struct GridCache {
    root: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub key: String,
    pub checked: Vec<usize>,
    pub max_deviation: f64,
}

impl GridCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        GridCache { root: root.into() }
    }

    pub fn for_config(cfg: &RunConfig) -> Self {
        Self::new(cfg.cache_root())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.root.join(format!("{PREFIX}{key}{SUFFIX}"))
    }

    pub fn load(&self, key: &str) -> Result<Option<SectorGrid>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        bincode::deserialize(&bytes)
            .map(Some)
            .map_err(|e| Error::Cache { key: key.to_string(), reason: format!("undecodable entry: {e}") })
    }

    /// Writes to a temporary file and renames it into place.
    pub fn store(&self, key: &str, grid: &SectorGrid) -> Result<PathBuf> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let path = self.path_for(key);
        let tmp = self.root.join(format!(".{PREFIX}{key}.{}.tmp", std::process::id()));
        let bytes = bincode::serialize(grid)
            .map_err(|e| Error::Cache { key: key.to_string(), reason: format!("cannot encode: {e}") })?;
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Cached grid for `cfg`, built and stored on a miss. An undecodable
    /// entry is rebuilt.
    pub fn grid(&self, cfg: &RunConfig) -> Result<SectorGrid> {
        let key = cfg.grid_key()?;
        match self.load(&key) {
            Ok(Some(g)) => return Ok(g),
            Ok(None) => {}
            Err(Error::Cache { reason, .. }) => eprintln!("cache entry {key} rebuilt: {reason}"),
            Err(e) => return Err(e),
        }
        let grid = build_grid(cfg)?;
        self.store(&key, &grid)?;
        Ok(grid)
    }

    /// Rebuilds a pseudo-random 5% of the sectors (at least one) and compares
    /// them with the cached ones.
    pub fn verify(&self, cfg: &RunConfig, tolerance: f64) -> Result<VerifyReport> {
        let key = cfg.grid_key()?;
        let grid = self.load(&key)?.ok_or_else(|| Error::Cache {
            key: key.clone(),
            reason: format!("no entry at {}", self.path_for(&key).display()),
        })?;
        let sys = cfg.system()?;
        let settings = cfg.basis_settings()?;
        let n = grid.sectors.len();
        if n == 0 || grid.boundaries.len() != n + 1 || grid.overlaps.len() + 1 != n {
            return Err(Error::Cache { key, reason: "inconsistent sector count".into() });
        }
        let mut order: Vec<(Vec<u8>, usize)> = (0..n)
            .map(|i| {
                let mut h = Sha256::new();
                h.update(key.as_bytes());
                h.update((i as u64).to_le_bytes());
                (h.finalize().to_vec(), i)
            })
            .collect();
        order.sort();
        let take = n.div_ceil(20).max(1);
        let mut checked: Vec<usize> = order[..take].iter().map(|p| p.1).collect();
        checked.sort_unstable();
        let mut worst: f64 = 0.0;
        for &i in &checked {
            let cached = &grid.sectors[i];
            let fresh = build_sector_basis(&sys, cached.rho, cached.half_width, &settings)?;
            let dev = basis_deviation(cached, &fresh);
            worst = worst.max(dev);
            if !(dev <= tolerance) {
                return Err(Error::Cache {
                    key,
                    reason: format!("sector {i} (rho = {}) differs by {dev:.3e}", cached.rho),
                });
            }
        }
        Ok(VerifyReport { key, checked, max_deviation: worst })
    }

    /// Removes keyed entries (and stale temporaries); returns their paths.
    pub fn clear(&self) -> Result<Vec<PathBuf>> {
        let mut removed = Vec::new();
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(removed),
            Err(e) => return Err(Error::io(&self.root, e)),
        };
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.root, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let keyed = name.starts_with(PREFIX) && name.ends_with(SUFFIX);
            let temp = name.starts_with(&format!(".{PREFIX}")) && name.ends_with(".tmp");
            if keyed || temp {
                let p = entry.path();
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
                removed.push(p);
            }
        }
        removed.sort();
        Ok(removed)
    }
}

pub fn build_grid(cfg: &RunConfig) -> Result<SectorGrid> {
    build_sector_grid(&cfg.system()?, &cfg.basis_settings()?, &cfg.grid)
}

/// Largest relative difference of energies and channel matrices; columns
/// are compared up to sign.
fn basis_deviation(a: &SectorBasis, b: &SectorBasis) -> f64 {
    if a.energies.len() != b.energies.len() || a.coeffs.shape() != b.coeffs.shape() || a.pairs != b.pairs {
        return f64::INFINITY;
    }
    let rel = |x: f64, y: f64, scale: f64| (x - y).abs() / scale.max(1e-300);
    let escale = a.energies.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut dev: f64 = 0.0;
    for (x, y) in a.energies.iter().zip(b.energies.iter()) {
        dev = dev.max(rel(*x, *y, escale));
    }
    for c in 0..a.coeffs.ncols() {
        let (ca, cb) = (a.coeffs.column(c), b.coeffs.column(c));
        let same = (ca - cb).amax();
        let flip = (ca + cb).amax();
        dev = dev.max(same.min(flip));
    }
    for (ma, mb) in [(&a.kinetic, &b.kinetic), (&a.potential, &b.potential)] {
        let scale = ma.amax();
        for (x, y) in ma.iter().zip(mb.iter()) {
            dev = dev.max(rel(x.abs(), y.abs(), scale));
        }
    }
    dev
}
