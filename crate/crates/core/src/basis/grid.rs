//! Sequence of sectors covering [rho_min, rho_max].

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sector::{build_sector_basis, sector_overlap, BasisSettings, SectorBasis};
use crate::error::{Error, Result};
use crate::kinematics::SystemDefinition;
use crate::linalg::nearest_orthogonal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSettings {
    /// Inner end of the propagation, in muonic Bohr radii.
    pub rho_min: f64,
    /// Matching radius, in muonic Bohr radii.
    pub rho_max: f64,
    /// Initial ratio of consecutive sector boundaries.
    pub ratio: f64,
    /// Refinement target for `max_i |1 - |O_ii||` between neighbours.
    pub max_rotation: f64,
    /// Sectors are never split below this boundary ratio.
    pub min_ratio: f64,
    pub refine_passes: usize,
    /// Replace each overlap by its nearest orthogonal matrix, removing the
    /// norm that leaks out of the channel window.
    pub orthogonalize: bool,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            rho_min: 0.05,
            rho_max: 200.0,
            ratio: 1.08,
            max_rotation: 0.1,
            min_ratio: 1.01,
            refine_passes: 3,
            orthogonalize: true,
        }
    }
}

impl GridSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_min > 0.0 && self.rho_max > self.rho_min) {
            return Err(Error::Config(format!(
                "need 0 < rho_min < rho_max (got {}, {})",
                self.rho_min, self.rho_max
            )));
        }
        if !(self.ratio > 1.0 && self.min_ratio > 1.0 && self.min_ratio <= self.ratio) {
            return Err(Error::Config("sector ratios must satisfy 1 < min_ratio <= ratio".into()));
        }
        if !(self.max_rotation > 0.0) {
            return Err(Error::Config("max_rotation must be positive".into()));
        }
        Ok(())
    }

    /// Geometric sector boundaries in bohr (mass-scaled).
    pub fn boundaries(&self, sys: &SystemDefinition) -> Vec<f64> {
        let a = sys.muonic_bohr();
        let (lo, hi) = (self.rho_min * a, self.rho_max * a);
        let n = ((hi / lo).ln() / self.ratio.ln()).ceil().max(1.0) as usize;
        let r = (hi / lo).powf(1.0 / n as f64);
        let mut b: Vec<f64> = (0..=n).map(|i| lo * r.powi(i as i32)).collect();
        b[n] = hi;
        b
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorGrid {
    pub boundaries: Vec<f64>,
    pub sectors: Vec<SectorBasis>,
    /// `overlaps[i]` maps sector i to sector i + 1.
    pub overlaps: Vec<DMatrix<f64>>,
    /// Basis evaluated at the outer boundary, used for matching.
    pub outer: SectorBasis,
    /// Overlap of the last sector with `outer`.
    pub outer_overlap: DMatrix<f64>,
    /// Smallest singular value of each raw overlap (last entry: outer).
    pub overlap_singular_min: Vec<f64>,
    pub orthogonalized: bool,
}

impl SectorGrid {
    pub fn rho_max(&self) -> f64 {
        *self.boundaries.last().expect("grid has boundaries")
    }

    /// Largest `|1 - |O_ii||` over each neighbouring pair.
    pub fn rotations(&self) -> Vec<f64> {
        self.overlaps.iter().map(max_rotation).collect()
    }
}

pub fn max_rotation(o: &DMatrix<f64>) -> f64 {
    (0..o.nrows().min(o.ncols())).map(|i| (1.0 - o[(i, i)].abs()).abs()).fold(0.0, f64::max)
}

/// Raw overlap, optionally orthogonalised, with its smallest singular value.
pub fn condition_overlap(o: DMatrix<f64>, orthogonalize: bool) -> (DMatrix<f64>, f64) {
    let (q, smin) = nearest_orthogonal(&o);
    if orthogonalize {
        (q, smin)
    } else {
        (o, smin)
    }
}

fn centre(b: &[f64], i: usize) -> (f64, f64) {
    (0.5 * (b[i] + b[i + 1]), 0.5 * (b[i + 1] - b[i]))
}

/// Builds (or refines) the sector sequence.
pub fn build_sector_grid(
    sys: &SystemDefinition,
    settings: &BasisSettings,
    grid: &GridSettings,
) -> Result<SectorGrid> {
    grid.validate()?;
    settings.validate()?;
    let mut bounds = grid.boundaries(sys);
    let mut sectors: Vec<Option<SectorBasis>> = vec![None; bounds.len() - 1];
    let mut pass = 0;
    loop {
        let todo: Vec<usize> = (0..sectors.len()).filter(|&i| sectors[i].is_none()).collect();
        let built: Vec<(usize, Result<SectorBasis>)> = todo
            .par_iter()
            .map(|&i| {
                let (c, w) = centre(&bounds, i);
                (i, build_sector_basis(sys, c, w, settings))
            })
            .collect();
        for (i, b) in built {
            sectors[i] = Some(b?);
        }
        let done: Vec<&SectorBasis> = sectors.iter().map(|s| s.as_ref().expect("built")).collect();
        let rot: Vec<f64> = (0..done.len() - 1)
            .into_par_iter()
            .map(|i| max_rotation(&sector_overlap(sys, done[i], done[i + 1])))
            .collect();
        if pass >= grid.refine_passes {
            break;
        }
        pass += 1;
        let mut split = vec![false; done.len()];
        for (i, r) in rot.iter().enumerate() {
            if *r >= grid.max_rotation {
                for j in [i, i + 1] {
                    if bounds[j + 1] / bounds[j] > grid.min_ratio * grid.min_ratio {
                        split[j] = true;
                    }
                }
            }
        }
        if !split.iter().any(|s| *s) {
            break;
        }
        let mut nb = vec![bounds[0]];
        let mut ns = Vec::new();
        for (i, s) in sectors.into_iter().enumerate() {
            if split[i] {
                nb.push((bounds[i] * bounds[i + 1]).sqrt());
                ns.push(None);
                ns.push(None);
            } else {
                ns.push(s);
            }
            nb.push(bounds[i + 1]);
        }
        bounds = nb;
        sectors = ns;
    }
    let sectors: Vec<SectorBasis> = sectors.into_iter().map(|s| s.expect("built")).collect();
    let rho_max = *bounds.last().expect("nonempty");
    let outer = build_sector_basis(sys, rho_max, 0.0, settings)?;
    let pairs: Vec<(DMatrix<f64>, f64)> = (0..sectors.len())
        .into_par_iter()
        .map(|i| {
            let next = sectors.get(i + 1).unwrap_or(&outer);
            condition_overlap(sector_overlap(sys, &sectors[i], next), grid.orthogonalize)
        })
        .collect();
    let overlap_singular_min = pairs.iter().map(|p| p.1).collect();
    let mut overlaps: Vec<DMatrix<f64>> = pairs.into_iter().map(|p| p.0).collect();
    let outer_overlap = overlaps.pop().expect("nonempty");
    Ok(SectorGrid {
        boundaries: bounds,
        sectors,
        overlaps,
        outer,
        outer_overlap,
        overlap_singular_min,
        orthogonalized: grid.orthogonalize,
    })
}
