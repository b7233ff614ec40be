//! Small dense linear-algebra helpers shared by the generators and the solvers.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Column means of an `n x p` data matrix.
pub fn column_means(data: &DMatrix<f64>) -> Vec<f64> {
    data.column_iter().map(|c| c.mean()).collect()
}

/// Returns a copy with every column centered at zero.
pub fn center_columns(data: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = data.clone();
    for mut col in out.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    out
}

/// Unbiased sample covariance of the columns.
pub fn sample_covariance(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows();
    let centered = center_columns(data);
    let mut cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    symmetrize(&mut cov);
    cov
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `D S D` with `D = diag(1/sqrt(S_ii))`; the diagonal is set to exactly one.
pub fn cov_to_cor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let p = cov.nrows();
    let inv_sd: Vec<f64> = (0..p).map(|i| 1.0 / cov[(i, i)].sqrt()).collect();
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            (cov[(i, j)] * inv_sd[i] * inv_sd[j]).clamp(-1.0, 1.0)
        }
    })
}

/// Index of the first column whose spread is zero up to rounding.
pub fn constant_column(data: &DMatrix<f64>) -> Option<usize> {
    data.column_iter().position(|col| {
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let scale = lo.abs().max(hi.abs()).max(1.0);
        hi - lo <= 1e-12 * scale
    })
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `lambda_max / lambda_min` of a symmetric positive-definite matrix.
pub fn condition_number(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("condition number of a non-square matrix".into()));
    }
    let ev = sym_eigenvalues(m);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(hi / lo)
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.clone().cholesky().is_some()
}

/// Symmetric square root `V diag(sqrt(l)) V^T`; fails unless every eigenvalue is positive.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * eig.eigenvalues[j].sqrt());
    let mut root = scaled * v.transpose();
    symmetrize(&mut root);
    Ok(root)
}

/// Natural log of the determinant of a positive-definite matrix.
pub fn log_det_pd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    Some(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn inverse_pd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Pearson correlation of two equally long slices; `None` when either is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}
