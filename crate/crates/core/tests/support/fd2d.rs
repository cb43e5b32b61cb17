//! Finite-volume discretisation of the fixed-rho problem on a graded
//! (eta, xi) mesh, solved by shift-invert subspace iteration.

use muxfer::basis::{axis_weight, kinetic_prefactor, Axis};
use muxfer::kinematics::SystemDefinition;
use muxfer::potential::weighted_potential;
use nalgebra::DMatrix;

/// Cell faces on `[lo, hi]`; spacing `h0` at clustered ends, growing
/// geometrically by `growth` up to `hmax`.
pub fn graded_faces(lo: f64, hi: f64, cluster: (bool, bool), h0: f64, growth: f64, hmax: f64) -> Vec<f64> {
    let dist = |u: f64| {
        let mut d = f64::INFINITY;
        if cluster.0 {
            d = d.min(u - lo);
        }
        if cluster.1 {
            d = d.min(hi - u);
        }
        d
    };
    let spacing = |u: f64| hmax.min(h0 + (growth - 1.0) * dist(u).max(0.0));
    let mut faces = vec![lo];
    let mut u = lo;
    while u < hi {
        let mut h = spacing(u);
        h = spacing(u + 0.5 * h);
        u += h;
        faces.push(u);
    }
    let scale = (hi - lo) / (u - lo);
    faces.iter().map(|f| lo + (f - lo) * scale).collect()
}

pub struct Mesh {
    pub eta_faces: Vec<f64>,
    pub xi_faces: Vec<f64>,
}

impl Mesh {
    pub fn cells(&self) -> (usize, usize) {
        (self.eta_faces.len() - 1, self.xi_faces.len() - 1)
    }
}

/// Pencil `(H, B)` of the five-point scheme: `H` as diagonal plus east
/// (eta) and north (xi) couplings, `B` diagonal.
struct Pencil {
    ne: usize,
    nx: usize,
    diag: Vec<f64>,
    east: Vec<f64>,
    north: Vec<f64>,
    weight: Vec<f64>,
}

impl Pencil {
    fn new(sys: &SystemDefinition, rho: f64, mesh: &Mesh) -> Self {
        let (ne, nx) = mesh.cells();
        let kin = kinetic_prefactor(sys, rho);
        let centre = |f: &[f64], i: usize| 0.5 * (f[i] + f[i + 1]);
        let (ef, xf) = (&mesh.eta_faces, &mesh.xi_faces);
        let n = ne * nx;
        let mut p = Pencil {
            ne,
            nx,
            diag: vec![0.0; n],
            east: vec![0.0; n],
            north: vec![0.0; n],
            weight: vec![0.0; n],
        };
        for j in 0..nx {
            let (xj, hx) = (centre(xf, j), xf[j + 1] - xf[j]);
            for i in 0..ne {
                let (ei, he) = (centre(ef, i), ef[i + 1] - ef[i]);
                let k = j * ne + i;
                let a = axis_weight(sys, Axis::Eta, ei);
                let b = axis_weight(sys, Axis::Xi, xj);
                p.diag[k] += weighted_potential(sys, rho, ei, xj) * he * hx;
                p.weight[k] = (a + b) * he * hx;
                if i + 1 < ne {
                    let c = kin * axis_weight(sys, Axis::Eta, ef[i + 1]) * hx / (centre(ef, i + 1) - ei);
                    p.east[k] = -c;
                    p.diag[k] += c;
                    p.diag[k + 1] += c;
                }
                if j + 1 < nx {
                    let c = kin * axis_weight(sys, Axis::Xi, xf[j + 1]) * he / (centre(xf, j + 1) - xj);
                    p.north[k] = -c;
                    p.diag[k] += c;
                    p.diag[k + ne] += c;
                }
            }
        }
        p
    }

    fn len(&self) -> usize {
        self.ne * self.nx
    }

    fn apply_h(&self, x: &[f64], y: &mut [f64]) {
        let ne = self.ne;
        for k in 0..self.len() {
            y[k] = self.diag[k] * x[k];
        }
        for k in 0..self.len() {
            if self.east[k] != 0.0 {
                y[k] += self.east[k] * x[k + 1];
                y[k + 1] += self.east[k] * x[k];
            }
            if self.north[k] != 0.0 {
                y[k] += self.north[k] * x[k + ne];
                y[k + ne] += self.north[k] * x[k];
            }
        }
    }
}

/// Banded Cholesky factor of `H - shift B`, lower band of width `ne`.
struct BandCholesky {
    n: usize,
    bw: usize,
    /// row-major: `l[i * (bw + 1) + (bw - (i - j))]` holds `L[i][j]`
    l: Vec<f64>,
}

impl BandCholesky {
    fn factor(p: &Pencil, shift: f64) -> Option<Self> {
        let (n, bw) = (p.len(), p.ne);
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for k in 0..n {
            l[k * w + bw] = p.diag[k] - shift * p.weight[k];
            if p.east[k] != 0.0 {
                l[(k + 1) * w + bw - 1] = p.east[k];
            }
            if p.north[k] != 0.0 {
                l[(k + bw) * w] = p.north[k];
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = l[i * w + bw - (i - j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= l[i * w + bw - (i - k)] * l[j * w + bw - (j - k)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + bw - (i - j)] = s / l[j * w + bw];
                }
            }
        }
        Some(BandCholesky { n, bw, l })
    }

    fn solve(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + bw - (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let s = x[i] / self.l[i * w + bw];
            x[i] = s;
            for k in i.saturating_sub(bw)..i {
                x[k] -= self.l[i * w + bw - (i - k)] * s;
            }
        }
    }
}

/// Lowest `count` eigenvalues of the discretised pencil. `shift` must lie
/// below the spectrum; it is lowered until the factorisation succeeds.
pub fn lowest_levels(sys: &SystemDefinition, rho: f64, mesh: &Mesh, count: usize, shift: f64) -> Vec<f64> {
    let p = Pencil::new(sys, rho, mesh);
    let n = p.len();
    let mut sigma = shift;
    let chol = loop {
        match BandCholesky::factor(&p, sigma) {
            Some(c) => break c,
            None => sigma -= sigma.abs().max(1.0),
        }
    };
    let block = 2 * count;
    // deterministic start vectors
    let mut x: Vec<Vec<f64>> = (0..block)
        .map(|c| (0..n).map(|k| (((k * (c + 3)) % 97) as f64 / 97.0 - 0.5) + if k % block == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut last = vec![f64::INFINITY; count];
    let mut hy = vec![0.0; n];
    for _ in 0..2000 {
        for v in &mut x {
            for (k, e) in v.iter_mut().enumerate() {
                *e *= p.weight[k];
            }
            chol.solve(v);
        }
        let mut hs = DMatrix::zeros(block, block);
        let mut bs = DMatrix::zeros(block, block);
        for a in 0..block {
            p.apply_h(&x[a], &mut hy);
            for b in 0..=a {
                let h: f64 = x[b].iter().zip(&hy).map(|(u, v)| u * v).sum();
                let w: f64 = x[b].iter().zip(&x[a]).zip(&p.weight).map(|((u, v), g)| u * v * g).sum();
                hs[(a, b)] = h;
                hs[(b, a)] = h;
                bs[(a, b)] = w;
                bs[(b, a)] = w;
            }
        }
        let l = bs.cholesky().expect("subspace lost rank").l();
        let li = l.clone().try_inverse().unwrap();
        let reduced = &li * hs * li.transpose();
        let eig = reduced.symmetric_eigen();
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let coeffs = li.transpose() * &eig.eigenvectors;
        let next: Vec<Vec<f64>> = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (a, xa) in x.iter().enumerate() {
                    let w = coeffs[(a, c)];
                    for (e, xv) in v.iter_mut().zip(xa) {
                        *e += w * xv;
                    }
                }
                v
            })
            .collect();
        x = next;
        let vals: Vec<f64> = order.iter().take(count).map(|&c| eig.eigenvalues[c]).collect();
        let done = vals.iter().zip(&last).all(|(a, b)| (a - b).abs() <= 1e-11 * a.abs().max(1e-3));
        last = vals;
        if done {
            break;
        }
    }
    last
}
