//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{BasisSettings, GridSettings};
use crate::error::{Error, Result};
use crate::kinematics::{Arrangement, Charges, Masses, SystemDefinition};
use crate::matching::{entrance_threshold, threshold, window_offset, ChannelSelection, MatchingSettings};
use crate::propagator::StepPolicy;
use crate::units::hartree_to_ev;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub masses: Masses,
    pub charges: Charges,
}

/// Basis sizes; the channel window itself follows from the selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    pub primitive_eta: usize,
    pub primitive_xi: usize,
    pub primitive_growth: f64,
    pub xi_margin: usize,
    pub contracted_eta: usize,
    pub contracted_xi: usize,
    pub product_pairs: usize,
    pub dilation_correction: bool,
    pub closure_correction: bool,
}

impl Default for BasisConfig {
    fn default() -> Self {
        let b = BasisSettings::default();
        BasisConfig {
            primitive_eta: b.primitive_eta,
            primitive_xi: b.primitive_xi,
            primitive_growth: b.primitive_growth,
            xi_margin: b.xi_margin,
            contracted_eta: b.contracted_eta,
            contracted_xi: b.contracted_xi,
            product_pairs: b.product_pairs,
            dilation_correction: b.dilation_correction,
            closure_correction: b.closure_correction,
        }
    }
}

/// Log-spaced collision energies in eV, measured from the entrance threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyGrid {
    pub min_ev: f64,
    pub max_ev: f64,
    pub count: usize,
}

impl Default for EnergyGrid {
    fn default() -> Self {
        EnergyGrid { min_ev: 1e-3, max_ev: 1e3, count: 60 }
    }
}

impl EnergyGrid {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min_ev],
            n => {
                let (a, b) = (self.min_ev.ln(), self.max_ev.ln());
                (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
            }
        }
    }

    /// Parses `lo,hi,count`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let bad = || Error::Config(format!("energies must be `lo,hi,count`, got `{text}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(EnergyGrid {
            min_ev: parts[0].parse().map_err(|_| bad())?,
            max_ev: parts[1].parse().map_err(|_| bad())?,
            count: parts[2].parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// A scan fails if any `max |S^+ S - I|` exceeds this.
    pub unitarity_ceiling: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { unitarity_ceiling: 5e-3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveConfig {
    /// Samples per sector when tabulating adiabatic curves.
    pub points_per_sector: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig { points_per_sector: 8 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown output format `{s}` (expected csv or json)"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    /// Cache root; falls back to `$MUXFER_CACHE`, then `.muxfer-cache`.
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: OutputFormat,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub channels: ChannelSelection,
    pub basis: BasisConfig,
    pub grid: GridSettings,
    pub propagation: StepPolicy,
    pub matching: MatchingSettings,
    pub energies: EnergyGrid,
    pub tolerances: Tolerances,
    pub curves: CurveConfig,
    pub cache: CacheConfig,
    pub output: OutputConfig,
}

pub const CACHE_ENV: &str = "MUXFER_CACHE";

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn system(&self) -> Result<SystemDefinition> {
        SystemDefinition::new(self.system.masses, self.system.charges)
    }

    pub fn basis_settings(&self) -> Result<BasisSettings> {
        let sys = self.system()?;
        let b = self.basis;
        Ok(BasisSettings {
            channels: crate::matching::enumerate_channels(&sys, 0.0, &self.channels).len(),
            skip: window_offset(&sys, &self.channels)?,
            primitive_eta: b.primitive_eta,
            primitive_xi: b.primitive_xi,
            primitive_growth: b.primitive_growth,
            xi_margin: b.xi_margin,
            contracted_eta: b.contracted_eta,
            contracted_xi: b.contracted_xi,
            product_pairs: b.product_pairs,
            dilation_correction: b.dilation_correction,
            closure_correction: b.closure_correction,
        })
    }

    /// Lowest threshold above the selected manifolds, in eV from the
    /// entrance threshold; collision energies must stay below it.
    pub fn energy_ceiling_ev(&self) -> Result<f64> {
        let sys = self.system()?;
        let e0 = entrance_threshold(&sys);
        let sel = &self.channels;
        let next = [
            threshold(&sys, Arrangement::Entrance, sel.pmu_n_max + 1),
            threshold(&sys, Arrangement::Product, sel.muo_n_max + 1),
        ];
        Ok(hartree_to_ev(next[0].min(next[1]) - e0))
    }

    pub fn validate(&self) -> Result<()> {
        let sys = self.system()?;
        self.basis_settings()?.validate()?;
        self.grid.validate()?;
        let sel = &self.channels;
        if sel.pmu_n_min != 1 || sel.pmu_n_max < 1 {
            return Err(Error::Config("the (p mu) selection must contain n = 1".into()));
        }
        let e = &self.energies;
        if e.count > 0 {
            if !(e.min_ev > 0.0 && e.max_ev >= e.min_ev) {
                return Err(Error::Config(format!(
                    "energy bounds must satisfy 0 < min <= max (got {}, {})",
                    e.min_ev, e.max_ev
                )));
            }
            let ceiling = self.energy_ceiling_ev()?;
            if e.max_ev >= ceiling {
                return Err(Error::Config(format!(
                    "energies up to {} eV open channels outside the selection (first at {ceiling:.1} eV)",
                    e.max_ev
                )));
            }
        }
        let p = &self.propagation;
        if p.min_steps_per_sector == 0 || !(p.points_per_wavelength > 0.0) || !(p.scale > 0.0) {
            return Err(Error::Config("propagation step controls must be positive".into()));
        }
        if !(self.tolerances.unitarity_ceiling > 0.0) {
            return Err(Error::Config("unitarity ceiling must be positive".into()));
        }
        if self.curves.points_per_sector == 0 {
            return Err(Error::Config("points_per_sector must be positive".into()));
        }
        let _ = sys;
        Ok(())
    }

    /// Key of the sector grid: everything the grid depends on.
    pub fn grid_key(&self) -> Result<String> {
        #[derive(Serialize)]
        struct KeyParts<'a> {
            version: &'a str,
            system: &'a SystemConfig,
            basis: BasisSettings,
            grid: &'a GridSettings,
        }
        let parts = KeyParts {
            version: env!("CARGO_PKG_VERSION"),
            system: &self.system,
            basis: self.basis_settings()?,
            grid: &self.grid,
        };
        let text = serde_json::to_string(&parts).map_err(|e| Error::Config(e.to_string()))?;
        Ok(hex::encode(&Sha256::digest(text.as_bytes())[..16]))
    }

    /// Hash of the whole configuration, recorded next to outputs.
    pub fn hash(&self) -> Result<String> {
        let text = serde_json::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    pub fn cache_root(&self) -> PathBuf {
        if let Some(d) = &self.cache.dir {
            return d.clone();
        }
        match std::env::var_os(CACHE_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from(".muxfer-cache"),
        }
    }
}
