//! Simple models used to read the close-coupling results: a three-channel
//! Landau-Zener estimate, threshold-law fits and angular-momentum
//! distributions of the transferred muon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{Arrangement, SystemDefinition};
use crate::matching::{entrance_threshold, threshold};
use crate::specfun::{clebsch_gordan, HalfInt};

/// Adiabatic energies (hartree) sampled on increasing hyper-radii (mass-scaled
/// bohr); `energies[k]` is sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub rho: Vec<f64>,
    pub energies: Vec<Vec<f64>>,
}

impl CurveTable {
    pub fn curve(&self, i: usize) -> Vec<f64> {
        self.energies.iter().map(|e| e[i]).collect()
    }

    pub fn channels(&self) -> usize {
        self.energies.first().map_or(0, Vec::len)
    }
}

/// A localized avoided crossing between two adiabatic curves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingParameters {
    /// Crossing radius (mass-scaled bohr).
    pub rho: f64,
    /// `|d(V_a - V_b)/d rho|` of the diabatic curves at the crossing.
    pub slope_difference: f64,
    /// Half the minimum adiabatic splitting (hartree).
    pub coupling: f64,
    /// Diabatic energy at the crossing (hartree); sets the local velocity.
    pub level: f64,
}

impl CrossingParameters {
    /// Radial velocity `sqrt(2 (E - level) / mass)`, or `None` if the
    /// crossing is classically forbidden at total energy `energy`.
    pub fn velocity(&self, energy: f64, mass: f64) -> Option<f64> {
        let ek = energy - self.level;
        (ek > 0.0).then(|| (2.0 * ek / mass).sqrt())
    }

    /// Probability of staying on the diabatic curve in one passage.
    pub fn diabatic_passage(&self, velocity: f64) -> f64 {
        if self.coupling == 0.0 {
            return 1.0;
        }
        (-2.0 * std::f64::consts::PI * self.coupling * self.coupling / (velocity * self.slope_difference)).exp()
    }
}

/// Diabatic parameters of an avoided crossing between adiabatic curves
/// `lower < upper` sampled on `rho`. For two linear diabatic curves the
/// squared splitting is exactly `dF^2 (rho - rho_c)^2 + 4 H^2`, so a quadratic
/// fit of `gap^2` around its smallest sample gives all three parameters.
pub fn extract_crossing(rho: &[f64], lower: &[f64], upper: &[f64]) -> Result<CrossingParameters> {
    if rho.len() != lower.len() || rho.len() != upper.len() || rho.len() < 5 {
        return Err(Error::Domain("crossing extraction needs at least 5 aligned samples".into()));
    }
    if rho.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("rho samples must increase".into()));
    }
    let gap: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| b - a).collect();
    if gap.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::Domain("upper curve lies below the lower one".into()));
    }
    let (i0, &g0) = gap.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    if i0 < 2 || i0 + 2 >= rho.len() {
        return Err(Error::Numerical(
            "no interior gap minimum: the curves do not cross in the sampled range".into(),
        ));
    }
    let (mut lo, mut hi) = (i0 - 2, i0 + 2);
    while lo > 0 && gap[lo - 1] < 3.0 * g0.max(1e-300) && gap[lo - 1] > gap[lo] {
        lo -= 1;
    }
    while hi + 1 < rho.len() && gap[hi + 1] < 3.0 * g0.max(1e-300) && gap[hi + 1] > gap[hi] {
        hi += 1;
    }
    let x: Vec<f64> = rho[lo..=hi].iter().map(|r| r - rho[i0]).collect();
    let y: Vec<f64> = gap[lo..=hi].iter().map(|g| g * g).collect();
    let [c0, c1, c2] = quadratic_fit(&x, &y)
        .ok_or_else(|| Error::Numerical("degenerate samples around the gap minimum".into()))?;
    if !(c2 > 0.0) {
        return Err(Error::Numerical("gap has no minimum: the curves do not cross".into()));
    }
    let shift = -c1 / (2.0 * c2);
    if shift < x[0] || shift > x[x.len() - 1] {
        return Err(Error::Numerical("fitted gap minimum lies outside the sampled window".into()));
    }
    let min_sq = (c0 - c1 * c1 / (4.0 * c2)).max(0.0);
    let rho_c = rho[i0] + shift;
    let mid: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(CrossingParameters {
        rho: rho_c,
        slope_difference: c2.sqrt(),
        coupling: 0.5 * min_sq.sqrt(),
        level: interpolate(rho, &mid, rho_c),
    })
}

/// Hyper-radius (mass-scaled bohr) where the (mu O) shell `n`, repelled by
/// the proton as a point charge, reaches the entrance threshold.
pub fn predicted_crossing(sys: &SystemDefinition, n: u32) -> Result<f64> {
    let z = sys.charges;
    let gap = entrance_threshold(sys) - threshold(sys, Arrangement::Product, n);
    let charge = z.proton * (z.oxygen + z.muon);
    if !(gap > 0.0) || !(charge > 0.0) {
        return Err(Error::Domain(format!("shell n = {n} does not cross the entrance channel")));
    }
    Ok(charge / gap * sys.scale_p_muo())
}

/// Dominant avoided crossing of the entrance curve with shell `n`: among
/// the gap minima of neighbouring curves near the predicted radius whose
/// centre lies near the entrance energy, the widest one.
pub fn extract_crossing_with_shell(sys: &SystemDefinition, table: &CurveTable, n: u32) -> Result<CrossingParameters> {
    let rc = predicted_crossing(sys, n)?;
    let e_ref = entrance_threshold(sys);
    // the entrance curve dips by the polarization energy; allow for it
    let tolerance = 0.1 * (threshold(sys, Arrangement::Product, n + 1) - threshold(sys, Arrangement::Product, n));
    let idx: Vec<usize> = (0..table.rho.len()).filter(|&k| table.rho[k] > 0.7 * rc && table.rho[k] < 1.4 * rc).collect();
    if idx.len() < 5 {
        return Err(Error::Numerical(format!("curve table does not resolve the n = {n} crossing near rho = {rc:.4}")));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..table.channels().saturating_sub(1) {
        for w in idx.windows(3) {
            let gap = |k: usize| table.energies[k][i + 1] - table.energies[k][i];
            let (g0, g1, g2) = (gap(w[0]), gap(w[1]), gap(w[2]));
            if !(g1 <= g0 && g1 <= g2) {
                continue;
            }
            let mid = 0.5 * (table.energies[w[1]][i] + table.energies[w[1]][i + 1]);
            if (mid - e_ref).abs() > tolerance {
                continue;
            }
            if best.is_none_or(|b| g1 > b.0) {
                best = Some((g1, i, w[1]));
            }
        }
    }
    let (_, i, k) = best.ok_or_else(|| Error::Numerical(format!("no avoided crossing with shell n = {n} found")))?;
    let lo = k.saturating_sub(12);
    let hi = (k + 13).min(table.rho.len());
    let rho = &table.rho[lo..hi];
    let lower: Vec<f64> = table.energies[lo..hi].iter().map(|e| e[i]).collect();
    let upper: Vec<f64> = table.energies[lo..hi].iter().map(|e| e[i + 1]).collect();
    extract_crossing(rho, &lower, &upper)
}

/// Crossings of the entrance curve with the n = 6 (outer) and n = 5 (inner)
/// shells.
pub fn extract_crossings(sys: &SystemDefinition, table: &CurveTable) -> Result<(CrossingParameters, CrossingParameters)> {
    Ok((extract_crossing_with_shell(sys, table, 6)?, extract_crossing_with_shell(sys, table, 5)?))
}

fn quadratic_fit(x: &[f64], y: &[f64]) -> Option<[f64; 3]> {
    let mut a = nalgebra::Matrix3::<f64>::zeros();
    let mut b = nalgebra::Vector3::<f64>::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let row = [1.0, xi, xi * xi];
        for r in 0..3 {
            b[r] += row[r] * yi;
            for c in 0..3 {
                a[(r, c)] += row[r] * row[c];
            }
        }
    }
    let s = a.lu().solve(&b)?;
    Some([s[0], s[1], s[2]])
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

fn interpolate(x: &[f64], y: &[f64], t: f64) -> f64 {
    let i = x.partition_point(|v| *v < t).clamp(1, x.len() - 1);
    let w = (t - x[i - 1]) / (x[i] - x[i - 1]);
    y[i - 1] + w * (y[i] - y[i - 1])
}

/// Transfer probabilities of the three-channel model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauZenerResult {
    pub outer: f64,
    pub inner: f64,
    pub total: f64,
    pub outer_passage: f64,
    pub inner_passage: f64,
}

/// Entrance curve crossing first the outer product level, then the inner
/// one, reflecting at small rho and leaving again; probabilities of the
/// individual passages are combined without interference. A crossing that
/// cannot be reached is passed diabatically (the inner one) or blocks all
/// transfer (the outer one).
pub fn landau_zener_transfer(
    energy: f64,
    mass: f64,
    outer: &CrossingParameters,
    inner: &CrossingParameters,
) -> Result<LandauZenerResult> {
    if !(mass > 0.0) {
        return Err(Error::Domain("mass must be positive".into()));
    }
    let Some(v_outer) = outer.velocity(energy, mass) else {
        return Ok(LandauZenerResult { outer: 0.0, inner: 0.0, total: 0.0, outer_passage: 1.0, inner_passage: 1.0 });
    };
    let p6 = outer.diabatic_passage(v_outer);
    let p5 = inner.velocity(energy, mass).map(|v| inner.diabatic_passage(v)).unwrap_or(1.0);
    // in: leave at the outer crossing (1 - p6), or continue; the inner pair
    // is crossed twice; on the way out the outer crossing is met again
    let to_outer = (1.0 - p6) * p6 + p6 * (p5 * p5 + (1.0 - p5) * (1.0 - p5)) * (1.0 - p6);
    let to_inner = p6 * 2.0 * p5 * (1.0 - p5);
    Ok(LandauZenerResult {
        outer: to_outer,
        inner: to_inner,
        total: to_outer + to_inner,
        outer_passage: p6,
        inner_passage: p5,
    })
}

/// Least-squares fit `P = prefactor * E^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
}

pub fn wigner_fit(energies: &[f64], probabilities: &[f64]) -> Result<PowerLawFit> {
    if energies.len() != probabilities.len() {
        return Err(Error::Domain("energy and probability lists differ in length".into()));
    }
    if energies.len() < 4 {
        return Err(Error::Domain(format!("need at least 4 points, got {}", energies.len())));
    }
    if let Some(p) = probabilities.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::Domain(format!("probabilities must be positive, got {p}")));
    }
    if let Some(e) = energies.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Domain(format!("energies must be positive, got {e}")));
    }
    let x: Vec<f64> = energies.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = probabilities.iter().map(|p| p.ln()).collect();
    let (slope, intercept) = line_fit(&x, &y);
    Ok(PowerLawFit { exponent: slope, prefactor: intercept.exp() })
}

/// Orbital distribution of the extreme parabolic state (`n_eta = n - 1`,
/// `n_xi = 0`) of shell `n`: `|<j j, j -j | l 0>|^2` with `j = (n - 1)/2`.
pub fn approx_l_distribution(n: u32) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("principal quantum number must be positive".into()));
    }
    let j = HalfInt::from_twice(n as i32 - 1);
    let mj = HalfInt::from_twice(-(n as i32 - 1));
    (0..n)
        .map(|l| clebsch_gordan(j, j, j, mj, HalfInt::int(l as i32), HalfInt::int(0)).map(|c| c * c))
        .collect()
}

/// Alternative reading with magnetic numbers `(m1, m2) = (j, -j)` swapped;
/// differs from [`approx_l_distribution`] only by the phase `(-1)^l`, so the
/// squared coefficients coincide.
pub fn approx_l_distribution_swapped(n: u32) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("principal quantum number must be positive".into()));
    }
    let j = HalfInt::from_twice(n as i32 - 1);
    let mj = HalfInt::from_twice(-(n as i32 - 1));
    (0..n)
        .map(|l| clebsch_gordan(j, j, mj, j, HalfInt::int(l as i32), HalfInt::int(0)).map(|c| c * c))
        .collect()
}

/// `sum_{m_j, m_l} |<l m_l, 1/2 m_j - m_l | j m_j>|^2` (equals `2j + 1`).
pub fn fine_structure_weight(l: u32, twice_j: i32) -> Result<f64> {
    let lh = HalfInt::int(l as i32);
    let half = HalfInt::from_twice(1);
    let mut sum = 0.0;
    for tmj in (-twice_j..=twice_j).step_by(2) {
        for ml in -(l as i32)..=(l as i32) {
            let tms = tmj - 2 * ml;
            if tms.abs() != 1 {
                continue;
            }
            let c = clebsch_gordan(
                lh,
                half,
                HalfInt::int(ml),
                HalfInt::from_twice(tms),
                HalfInt::from_twice(twice_j),
                HalfInt::from_twice(tmj),
            )?;
            sum += c * c;
        }
    }
    Ok(sum)
}

/// Fine-structure populations of one shell from its orbital populations
/// `p[l]`; the result is indexed by `j - 1/2` (`j = 1/2 .. n - 1/2`) and sums
/// to one.
pub fn j_distribution(p: &[f64]) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(Error::Domain("empty orbital distribution".into()));
    }
    if let Some(v) = p.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("populations must be nonnegative, got {v}")));
    }
    let mut out = vec![0.0; p.len()];
    for (l, &pl) in p.iter().enumerate() {
        if pl == 0.0 {
            continue;
        }
        let norm = (2 * l + 1) as f64;
        for twice_j in [2 * l as i32 - 1, 2 * l as i32 + 1] {
            if twice_j < 1 {
                continue;
            }
            let idx = ((twice_j - 1) / 2) as usize;
            if idx >= out.len() {
                continue;
            }
            out[idx] += pl / norm * fine_structure_weight(l as u32, twice_j)?;
        }
    }
    // the top j of the shell receives only from l = n - 1
    let total: f64 = out.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain("orbital distribution has no weight".into()));
    }
    Ok(out.into_iter().map(|v| v / total).collect())
}

/// Normalizes a nonnegative vector to unit sum.
pub fn normalize(p: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = p.iter().sum();
    if !(total > 0.0) || p.iter().any(|v| *v < 0.0) {
        return Err(Error::Domain("distribution must be nonnegative with positive sum".into()));
    }
    Ok(p.iter().map(|v| v / total).collect())
}

/// Sum of absolute differences of two distributions of equal length.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|x| x.0).unwrap_or(0)
}
