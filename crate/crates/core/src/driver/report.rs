//! Comparison of the scan with the simple models.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::curves::csv_err;
use crate::error::{Error, Result};
use crate::kinematics::SystemDefinition;
use crate::matching::entrance_threshold;
use crate::models::{
    approx_l_distribution, argmax, extract_crossings, j_distribution, l1_distance, landau_zener_transfer,
    normalize, wigner_fit, CrossingParameters, CurveTable, PowerLawFit,
};
use crate::units::{ev_to_hartree, hartree_to_ev};

/// The columns of a scan table that the models need.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScanTable {
    pub energy_ev: Vec<f64>,
    /// `None` for failed rows.
    pub total: Vec<Option<f64>>,
    /// (n, l) -> per-row probability.
    pub partial: BTreeMap<(u32, u32), Vec<Option<f64>>>,
}

pub fn read_scan_table(path: &Path) -> Result<ScanTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scan_table(&text)
}

pub fn parse_scan_table(text: &str) -> Result<ScanTable> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| Error::Schema(name.into()));
    let ie = col("energy_ev")?;
    let it = col("total")?;
    let is = col("status")?;
    let mut partial_cols = Vec::new();
    for (i, h) in header.iter().enumerate() {
        if let Some(rest) = h.strip_prefix("p_n") {
            if let Some((n, l)) = rest.split_once("_l") {
                if let (Ok(n), Ok(l)) = (n.parse::<u32>(), l.parse::<u32>()) {
                    partial_cols.push(((n, l), i));
                }
            }
        }
    }
    for n in [5u32, 6] {
        for l in 0..n {
            if !partial_cols.iter().any(|p| p.0 == (n, l)) {
                return Err(Error::Schema(format!("p_n{n}_l{l}")));
            }
        }
    }
    let mut t = ScanTable::default();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let e: f64 = rec
            .get(ie)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Schema("energy_ev".into()))?;
        let ok = rec.get(is) == Some("ok");
        let num = |i: usize, name: &str| -> Result<Option<f64>> {
            if !ok {
                return Ok(None);
            }
            rec.get(i).and_then(|v| v.parse().ok()).map(Some).ok_or_else(|| Error::Schema(name.into()))
        };
        t.energy_ev.push(e);
        t.total.push(num(it, "total")?);
        for &((n, l), i) in &partial_cols {
            let v = num(i, &format!("p_n{n}_l{l}"))?;
            t.partial.entry((n, l)).or_default().push(v);
        }
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingSummary {
    pub rho_amu: f64,
    pub slope_difference_ev_per_amu: f64,
    pub coupling_ev: f64,
    pub level_ev: f64,
    pub raw: CrossingParameters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauZenerRow {
    pub energy_ev: f64,
    pub model: f64,
    pub full: Option<f64>,
    pub ratio: Option<f64>,
    /// Only rows at or above 1 eV are held to the factor-of-two band.
    pub checked: bool,
    pub within_factor_two: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerSummary {
    pub window_ev: [f64; 2],
    pub points: usize,
    pub fit: Option<PowerLawFit>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LDistributionRow {
    pub energy_ev: f64,
    pub n: u32,
    pub exact: Vec<f64>,
    pub approximate: Vec<f64>,
    pub l1_distance: f64,
    pub same_argmax: bool,
    pub j_exact: Vec<f64>,
    pub j_approximate: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub outer_crossing: Option<CrossingSummary>,
    pub inner_crossing: Option<CrossingSummary>,
    pub crossing_error: Option<String>,
    pub landau_zener: Vec<LandauZenerRow>,
    pub wigner: WignerSummary,
    pub l_distributions: Vec<LDistributionRow>,
}

fn summarize(sys: &SystemDefinition, c: &CrossingParameters) -> CrossingSummary {
    let a = sys.muonic_bohr();
    CrossingSummary {
        rho_amu: c.rho / a,
        slope_difference_ev_per_amu: hartree_to_ev(c.slope_difference) * a,
        coupling_ev: hartree_to_ev(c.coupling),
        level_ev: hartree_to_ev(c.level - entrance_threshold(sys)),
        raw: *c,
    }
}

pub const WIGNER_WINDOW_EV: [f64; 2] = [1e-3, 1e-2];

pub fn model_report(sys: &SystemDefinition, curves: &CurveTable, scan: &ScanTable) -> Result<ModelReport> {
    let e0 = entrance_threshold(sys);
    let (outer, inner, crossing_error) = match extract_crossings(sys, curves) {
        Ok((o, i)) => (Some(o), Some(i), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    let mut landau_zener = Vec::new();
    if let (Some(o), Some(i)) = (&outer, &inner) {
        for (k, &e) in scan.energy_ev.iter().enumerate() {
            let model = landau_zener_transfer(e0 + ev_to_hartree(e), sys.scaling_mass, o, i)?.total;
            let full = scan.total[k];
            let ratio = full.filter(|f| *f > 0.0).map(|f| model / f);
            let checked = e >= 1.0;
            landau_zener.push(LandauZenerRow {
                energy_ev: e,
                model,
                full,
                ratio,
                checked,
                within_factor_two: ratio.filter(|_| checked).map(|r| (0.5..=2.0).contains(&r)),
            });
        }
    }

    let (xs, ys): (Vec<f64>, Vec<f64>) = scan
        .energy_ev
        .iter()
        .zip(&scan.total)
        .filter(|(e, _)| **e >= WIGNER_WINDOW_EV[0] * (1.0 - 1e-9) && **e <= WIGNER_WINDOW_EV[1] * (1.0 + 1e-9))
        .filter_map(|(e, p)| p.map(|p| (*e, p)))
        .unzip();
    let wigner = match wigner_fit(&xs, &ys) {
        Ok(fit) => WignerSummary { window_ev: WIGNER_WINDOW_EV, points: xs.len(), fit: Some(fit), note: None },
        Err(e) => WignerSummary { window_ev: WIGNER_WINDOW_EV, points: xs.len(), fit: None, note: Some(e.to_string()) },
    };

    let mut l_distributions = Vec::new();
    for n in [5u32, 6] {
        let approximate = approx_l_distribution(n)?;
        let j_approximate = j_distribution(&approximate)?;
        for (k, &e) in scan.energy_ev.iter().enumerate() {
            let raw: Option<Vec<f64>> = (0..n).map(|l| scan.partial.get(&(n, l)).and_then(|v| v[k])).collect();
            let Some(raw) = raw else { continue };
            let Ok(exact) = normalize(&raw) else { continue };
            l_distributions.push(LDistributionRow {
                energy_ev: e,
                n,
                l1_distance: l1_distance(&exact, &approximate),
                same_argmax: argmax(&exact) == argmax(&approximate),
                j_exact: j_distribution(&exact)?,
                j_approximate: j_approximate.clone(),
                exact,
                approximate: approximate.clone(),
            });
        }
    }

    Ok(ModelReport {
        outer_crossing: outer.as_ref().map(|c| summarize(sys, c)),
        inner_crossing: inner.as_ref().map(|c| summarize(sys, c)),
        crossing_error,
        landau_zener,
        wigner,
        l_distributions,
    })
}

/// Landau-Zener comparison as CSV.
pub fn landau_zener_csv(report: &ModelReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["energy_ev", "landau_zener", "full", "ratio", "checked", "within_factor_two"])
        .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in &report.landau_zener {
        w.write_record([
            format!("{:e}", r.energy_ev),
            format!("{:e}", r.model),
            opt(r.full),
            opt(r.ratio),
            r.checked.to_string(),
            r.within_factor_two.map(|b| b.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}
