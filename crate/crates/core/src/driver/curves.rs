//! Adiabatic curve tables.

use std::path::Path;

use nalgebra::DMatrix;

use crate::basis::SectorGrid;
use crate::error::{Error, Result};
use crate::kinematics::SystemDefinition;
use crate::linalg::sym_eigenvalues;
use crate::matching::entrance_threshold;
use crate::models::CurveTable;
use crate::units::{ev_to_hartree, hartree_to_ev};

/// Channel energies sampled `points` times inside each sector, from the
/// sector Hamiltonian without the rho-reduction and closure terms.
pub fn compute_curves(sys: &SystemDefinition, grid: &SectorGrid, points: usize) -> CurveTable {
    let points = points.max(1);
    let m = sys.scaling_mass;
    let mut rho = Vec::new();
    let mut energies = Vec::new();
    for (i, sector) in grid.sectors.iter().enumerate() {
        let (a, b) = (grid.boundaries[i], grid.boundaries[i + 1]);
        let n = sector.channels();
        let mut w = DMatrix::zeros(n, n);
        for k in 0..points {
            let r = a + (b - a) * (k as f64 + 0.5) / points as f64;
            sector.coupling_matrix_into(sys, r, &mut w);
            let ratio = sector.rho / r;
            w -= &sector.closure * (ratio * ratio);
            let reduction = 15.0 / (8.0 * m * r * r);
            for d in 0..n {
                w[(d, d)] -= reduction;
            }
            let mut e: Vec<f64> = sym_eigenvalues(w.clone()).iter().copied().collect();
            e.sort_by(f64::total_cmp);
            rho.push(r);
            energies.push(e);
        }
    }
    CurveTable { rho, energies }
}

/// CSV header `rho_amu,e1,...`; energies in eV from the entrance threshold.
pub fn curves_to_csv(sys: &SystemDefinition, table: &CurveTable) -> Result<String> {
    let a = sys.muonic_bohr();
    let e0 = entrance_threshold(sys);
    let n = table.energies.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["rho_amu".to_string()];
    header.extend((1..=n).map(|i| format!("e{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (r, e) in table.rho.iter().zip(&table.energies) {
        let mut rec = vec![format!("{:e}", r / a)];
        rec.extend(e.iter().map(|v| format!("{:e}", hartree_to_ev(v - e0))));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

pub fn read_curves(sys: &SystemDefinition, path: &Path) -> Result<CurveTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curves(sys, &text)
}

pub fn parse_curves(sys: &SystemDefinition, text: &str) -> Result<CurveTable> {
    let a = sys.muonic_bohr();
    let e0 = entrance_threshold(sys);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("rho_amu") {
        return Err(Error::Schema("rho_amu".into()));
    }
    let n = header.len() - 1;
    for i in 1..=n {
        if header.get(i) != Some(format!("e{i}").as_str()) {
            return Err(Error::Schema(format!("e{i}")));
        }
    }
    if n == 0 {
        return Err(Error::Schema("e1".into()));
    }
    let mut table = CurveTable { rho: Vec::new(), energies: Vec::new() };
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Schema(header.get(i).unwrap_or("?").to_string()))
        };
        table.rho.push(num(0)? * a);
        table.energies.push((1..=n).map(|i| num(i).map(|v| ev_to_hartree(v) + e0)).collect::<Result<_>>()?);
    }
    Ok(table)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}
