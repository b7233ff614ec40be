//! Graphical lasso by block coordinate descent on the working covariance `W`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lasso::lasso_in_place;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlassoOptions {
    /// Penalise `|Theta_ii|` as well as the off-diagonal entries.
    pub penalize_diagonal: bool,
    pub max_sweeps: usize,
    /// Convergence when the mean absolute change of `Theta` drops below
    /// `tolerance * mean |S_ij|` over the off-diagonal.
    pub tolerance: f64,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        Self { penalize_diagonal: true, max_sweeps: 500, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    pub lambda: f64,
    pub theta: DMatrix<f64>,
    /// Working covariance, the inverse of `theta` at convergence.
    pub w: DMatrix<f64>,
    /// Column `j` holds the regression of node `j` on the others (zero at `j`).
    pub beta: DMatrix<f64>,
    pub objective: f64,
    pub sweeps: usize,
}

impl PrecisionEstimate {
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.theta[(i, j)] != 0.0
    }
}

/// `-log det Theta + tr(Theta S) + lambda sum |Theta_ij|`; `+inf` off the PD cone.
pub fn glasso_objective(theta: &DMatrix<f64>, s: &DMatrix<f64>, lambda: f64, penalize_diagonal: bool) -> f64 {
    let Some(ld) = linalg::log_det_pd(theta) else {
        return f64::INFINITY;
    };
    let p = theta.nrows();
    let trace: f64 = (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| theta[(i, j)] * s[(j, i)]).sum();
    let penalty: f64 = (0..p)
        .flat_map(|i| (0..p).map(move |j| (i, j)))
        .filter(|&(i, j)| penalize_diagonal || i != j)
        .map(|(i, j)| theta[(i, j)].abs())
        .sum();
    -ld + trace + lambda * penalty
}

fn max_off_diagonal(s: &DMatrix<f64>) -> f64 {
    let p = s.nrows();
    let mut m: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                m = m.max(s[(i, j)].abs());
            }
        }
    }
    m
}

pub fn glasso_solve(
    s: &DMatrix<f64>,
    lambda: f64,
    warm: Option<&PrecisionEstimate>,
    opts: &GlassoOptions,
) -> Result<PrecisionEstimate> {
    let p = s.nrows();
    if s.ncols() != p || p == 0 {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", p, s.ncols())));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("glasso penalty must be positive, got {lambda}")));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("glasso input"));
    }
    for i in 0..p {
        for j in 0..i {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-10 * (1.0 + s[(i, j)].abs()) {
                return Err(Error::InvalidParameter("glasso input is not symmetric".into()));
            }
        }
    }
    let diag_pen = if opts.penalize_diagonal { lambda } else { 0.0 };
    if (0..p).any(|i| s[(i, i)] + diag_pen <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }

    // Above the largest off-diagonal entry the solution is diagonal.
    if lambda >= max_off_diagonal(s) {
        let theta = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / (s[(i, i)] + diag_pen) } else { 0.0 });
        let w = DMatrix::from_fn(p, p, |i, j| if i == j { s[(i, i)] + diag_pen } else { 0.0 });
        let objective = glasso_objective(&theta, s, lambda, opts.penalize_diagonal);
        return Ok(PrecisionEstimate { lambda, theta, w, beta: DMatrix::zeros(p, p), objective, sweeps: 0 });
    }

    let (mut w, mut beta) = match warm {
        Some(e) if e.w.nrows() == p => (e.w.clone(), e.beta.clone()),
        Some(_) => return Err(Error::DimensionMismatch("warm start has a different dimension".into())),
        None => (s.clone(), DMatrix::zeros(p, p)),
    };
    for i in 0..p {
        w[(i, i)] = s[(i, i)] + diag_pen;
    }
    let mut theta = theta_from(&w, &beta);
    let mut off_mean = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                off_mean += s[(i, j)].abs();
            }
        }
    }
    off_mean /= (p * (p - 1)) as f64;
    let threshold = opts.tolerance * off_mean;

    for sweep in 1..=opts.max_sweeps {
        for j in 0..p {
            let c: Vec<f64> = s.column(j).iter().copied().collect();
            let mut b: Vec<f64> = beta.column(j).iter().copied().collect();
            lasso_in_place(&w, &c, 2.0 * lambda, &mut b, Some(j))?;
            let active: Vec<usize> = (0..p).filter(|&k| b[k] != 0.0).collect();
            let w12: Vec<f64> = (0..p).map(|i| active.iter().map(|&k| w[(i, k)] * b[k]).sum()).collect();
            for i in 0..p {
                beta[(i, j)] = b[i];
                if i != j {
                    w[(i, j)] = w12[i];
                    w[(j, i)] = w12[i];
                }
            }
        }
        let next = theta_from(&w, &beta);
        let change = (&next - &theta).abs().mean();
        theta = next;
        if change < threshold {
            let mut sym = theta.clone();
            for i in 0..p {
                for j in 0..i {
                    let v = 0.5 * (sym[(i, j)] + sym[(j, i)]);
                    sym[(i, j)] = v;
                    sym[(j, i)] = v;
                }
            }
            if !linalg::is_positive_definite(&sym) {
                return Err(Error::NotPositiveDefinite);
            }
            let objective = glasso_objective(&sym, s, lambda, opts.penalize_diagonal);
            return Ok(PrecisionEstimate { lambda, theta: sym, w, beta, objective, sweeps: sweep });
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_sweeps, residual: (theta_from(&w, &beta) - theta).abs().mean() })
}

/// `Theta_jj = 1 / (W_jj - w_12' beta_j)` and `Theta_{-j,j} = -beta_j Theta_jj`.
fn theta_from(w: &DMatrix<f64>, beta: &DMatrix<f64>) -> DMatrix<f64> {
    let p = w.nrows();
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let dot: f64 = (0..p).filter(|&i| i != j).map(|i| w[(i, j)] * beta[(i, j)]).sum();
        let tjj = 1.0 / (w[(j, j)] - dot);
        for i in 0..p {
            theta[(i, j)] = if i == j { tjj } else { -beta[(i, j)] * tjj };
        }
    }
    theta
}

/// Solutions along a decreasing penalty sequence, each warm-started from the previous.
pub fn glasso_path(s: &DMatrix<f64>, lambdas: &[f64], opts: &GlassoOptions) -> Result<Vec<PrecisionEstimate>> {
    let mut out: Vec<PrecisionEstimate> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let est = glasso_solve(s, lambda, out.last(), opts)?;
        out.push(est);
    }
    Ok(out)
}
