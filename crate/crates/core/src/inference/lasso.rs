//! Lasso by cyclic coordinate descent on the Gram matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Stopping threshold on the KKT residual, tighter than the contract's 1e-7.
pub const KKT_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 100_000;

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Minimises `beta' G beta - 2 c' beta + lambda |beta|_1`.
///
/// With `G = X'X/n` and `c = X'y/n` this is `(1/n)|y - X beta|^2 + lambda |beta|_1` up to a
/// constant. Coordinates are visited in ascending order; after each full sweep the solver
/// cycles over the active set until it settles.
pub fn lasso_gram(g: &DMatrix<f64>, c: &[f64], lambda: f64, warm: Option<&[f64]>) -> Result<Vec<f64>> {
    let d = c.len();
    if g.nrows() != d || g.ncols() != d {
        return Err(Error::DimensionMismatch(format!("{}x{} Gram for {d} predictors", g.nrows(), g.ncols())));
    }
    if g.iter().chain(c).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lasso input"));
    }
    let mut beta = match warm {
        Some(w) if w.len() == d => w.to_vec(),
        Some(w) => return Err(Error::DimensionMismatch(format!("warm start of length {} for {d} predictors", w.len()))),
        None => vec![0.0; d],
    };
    lasso_in_place(g, c, lambda, &mut beta, None)?;
    Ok(beta)
}

/// Coordinate descent on `beta` in place. Coordinate `skip`, if any, is held at zero,
/// which solves the sub-problem on `G` with that row and column removed without copying.
pub(crate) fn lasso_in_place(
    g: &DMatrix<f64>,
    c: &[f64],
    lambda: f64,
    beta: &mut [f64],
    skip: Option<usize>,
) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    let d = c.len();
    let coords: Vec<usize> = (0..d).filter(|&j| Some(j) != skip).collect();
    if let Some(k) = skip {
        beta[k] = 0.0;
    }
    // grad = c - G beta, kept current under every coordinate change.
    let mut grad: Vec<f64> = c.to_vec();
    for (k, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (gr, gv) in grad.iter_mut().zip(g.column(k).iter()) {
                *gr -= gv * b;
            }
        }
    }
    let half = lambda / 2.0;

    let update = |j: usize, beta: &mut [f64], grad: &mut [f64]| -> f64 {
        let gjj = g[(j, j)];
        if gjj <= 0.0 {
            return 0.0;
        }
        let new = soft_threshold(grad[j] + gjj * beta[j], half) / gjj;
        let delta = new - beta[j];
        if delta != 0.0 {
            beta[j] = new;
            for (gr, gv) in grad.iter_mut().zip(g.column(j).iter()) {
                *gr -= gv * delta;
            }
        }
        delta.abs()
    };
    let violation = |beta: &[f64], grad: &[f64], set: &[usize]| -> f64 {
        set.iter().map(|&j| kkt_term(beta[j], grad[j], lambda)).fold(0.0, f64::max)
    };

    let mut sweeps = 0;
    loop {
        for &j in &coords {
            update(j, beta, &mut grad);
        }
        sweeps += 1;
        if violation(beta, &grad, &coords) <= KKT_TOL {
            return Ok(());
        }
        let active: Vec<usize> = coords.iter().copied().filter(|&j| beta[j] != 0.0).collect();
        loop {
            let mut change: f64 = 0.0;
            for &j in &active {
                change = change.max(update(j, beta, &mut grad));
            }
            sweeps += 1;
            if change == 0.0 || violation(beta, &grad, &active) <= KKT_TOL / 4.0 || sweeps >= MAX_SWEEPS {
                break;
            }
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::NonConvergence { iterations: sweeps, residual: violation(beta, &grad, &coords) });
        }
    }
}

fn kkt_term(b: f64, gr: f64, lambda: f64) -> f64 {
    let z = 2.0 * gr;
    if b > 0.0 {
        (z - lambda).abs()
    } else if b < 0.0 {
        (z + lambda).abs()
    } else {
        (z.abs() - lambda).max(0.0)
    }
}

/// Largest violation of the optimality conditions given `grad = c - G beta`.
fn kkt_from_gradient(beta: &[f64], grad: &[f64], lambda: f64) -> f64 {
    beta.iter().zip(grad).map(|(&b, &gr)| kkt_term(b, gr, lambda)).fold(0.0, f64::max)
}

/// Gram quantities `X'X/n` and `X'y/n`.
pub fn gram(x: &DMatrix<f64>, y: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let g = x.tr_mul(x) / n;
    let c = (0..x.ncols()).map(|j| x.column(j).iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n).collect();
    (g, c)
}

/// Solves `min (1/n)|y - X beta|^2 + lambda |beta|_1`. Callers centre `X` and `y`.
pub fn lasso_solve(x: &DMatrix<f64>, y: &[f64], lambda: f64, warm: Option<&[f64]>) -> Result<Vec<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} rows for {} responses", x.nrows(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lasso input"));
    }
    let (g, c) = gram(x, y);
    lasso_gram(&g, &c, lambda, warm)
}

pub fn lasso_objective(x: &DMatrix<f64>, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = x.nrows() as f64;
    let rss: f64 = (0..x.nrows())
        .map(|i| {
            let fit: f64 = (0..x.ncols()).map(|j| x[(i, j)] * beta[j]).sum();
            (y[i] - fit).powi(2)
        })
        .sum();
    rss / n + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Largest KKT violation `|2 X_j'(y - X beta)/n| - lambda` (or the sign-consistent equality
/// gap on the active set), computed from the raw data.
pub fn kkt_residual(x: &DMatrix<f64>, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = x.nrows() as f64;
    let resid: Vec<f64> =
        (0..x.nrows()).map(|i| y[i] - (0..x.ncols()).map(|j| x[(i, j)] * beta[j]).sum::<f64>()).collect();
    let grad: Vec<f64> =
        (0..x.ncols()).map(|j| x.column(j).iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n).collect();
    kkt_from_gradient(beta, &grad, lambda)
}

/// Smallest penalty with an all-zero solution: `2 max_j |X_j'y| / n`.
pub fn lambda_max(x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let (_, c) = gram(x, y);
    2.0 * c.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
