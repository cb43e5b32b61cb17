//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix with ascending eigenvalues.
pub fn sym_eigen(a: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Ascending eigenvalues only.
pub fn sym_eigenvalues(a: DMatrix<f64>) -> DVector<f64> {
    let mut v: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    DVector::from_vec(v)
}

/// Solves `H c = e S c` for symmetric `H` and positive definite `S`.
/// Eigenvectors are S-orthonormal, eigenvalues ascending.
pub fn generalized_sym_eigen(h: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    let chol = s.clone().cholesky().ok_or_else(|| {
        Error::Numerical(format!(
            "overlap matrix not positive definite (condition estimate {:.3e})",
            condition_estimate(s)
        ))
    })?;
    let l = chol.l();
    let diag_ratio = {
        let d: Vec<f64> = (0..n).map(|i| l[(i, i)].abs()).collect();
        let mx = d.iter().cloned().fold(0.0, f64::max);
        let mn = d.iter().cloned().fold(f64::INFINITY, f64::min);
        (mx / mn).powi(2)
    };
    if diag_ratio > 1e12 {
        return Err(Error::Numerical(format!(
            "overlap matrix ill-conditioned (condition estimate {diag_ratio:.3e})"
        )));
    }
    // A = L^-1 H L^-T
    let mut x = h.clone();
    l.solve_lower_triangular_mut(&mut x);
    let mut a = x.transpose();
    l.solve_lower_triangular_mut(&mut a);
    let a = 0.5 * (&a + a.transpose());
    let (vals, y) = sym_eigen(a);
    let mut c = y;
    l.tr_solve_lower_triangular_mut(&mut c);
    Ok((vals, c))
}

/// Ratio of extreme singular values; infinite for non-finite input or
/// when the SVD does not converge.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    if a.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let Some(svd) = a.clone().try_svd(false, false, f64::EPSILON, 10_000) else {
        return f64::INFINITY;
    };
    let sv = svd.singular_values;
    let mx = sv.iter().cloned().fold(0.0, f64::max);
    let mn = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Frobenius norm of the antisymmetric part relative to the norm of `a`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.norm();
    if n == 0.0 {
        0.0
    } else {
        (a - a.transpose()).norm() / n
    }
}

/// Nearest orthogonal matrix `U V^T` (polar factor) and the smallest
/// singular value of the input.
pub fn nearest_orthogonal(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let svd = m.clone().svd(true, true);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    (u * vt, smin)
}
