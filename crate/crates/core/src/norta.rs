//! Correlated count synthesis through a Gaussian copula (normal-to-anything).
//!
//! Latent rows `z ~ N(0, R)` are pushed through `Phi` and then through each column's
//! quantile function. No correction is applied to `R` for the distortion the discrete
//! margins introduce; [`correlation_recovery_report`] measures it instead.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compositions::CountMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::marginals::{ks_statistic, std_normal_cdf, MarginalModel};
use crate::seed;

/// Latent levels are kept away from 0 and 1 so every quantile is finite.
pub const Q_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    pub correlation: DMatrix<f64>,
    pub marginals: Vec<MarginalModel>,
    pub n: usize,
    pub seed: u64,
}

impl SynthesisSpec {
    pub fn validate(&self) -> Result<()> {
        let p = self.correlation.nrows();
        if self.correlation.ncols() != p || self.marginals.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} correlation with {} marginals",
                p,
                self.correlation.ncols(),
                self.marginals.len()
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("need at least one sample".into()));
        }
        for i in 0..p {
            if (self.correlation[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("correlation diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                if (self.correlation[(i, j)] - self.correlation[(j, i)]).abs() > 1e-9 {
                    return Err(Error::InvalidParameter("correlation matrix is not symmetric".into()));
                }
            }
        }
        self.marginals.iter().try_for_each(MarginalModel::validate)
    }
}

/// `n` rows of `N(0, R)` as `S z` with `S` the symmetric square root of `R`.
///
/// Rows are drawn one after another from a single stream, so a smaller `n` yields a
/// prefix of a larger one under the same seed.
pub fn sample_mvn(r: &DMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let p = r.nrows();
    if r.ncols() != p {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", p, r.ncols())));
    }
    let root = linalg::symmetric_sqrt(r)?;
    let mut rng = seed::rng(seed);
    let z = DMatrix::<f64>::from_fn(p, n, |_, _| StandardNormal.sample(&mut rng));
    // from_fn fills column-major, so each column of `z` is one row's draw.
    Ok((root * z).transpose())
}

/// Applies `quantile_j(Phi(z_ij))` to a latent matrix.
pub fn counts_from_latent(latent: &DMatrix<f64>, marginals: &[MarginalModel]) -> Result<DMatrix<u64>> {
    if latent.ncols() != marginals.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} latent columns for {} marginals",
            latent.ncols(),
            marginals.len()
        )));
    }
    let quantilers = marginals.iter().map(|m| m.quantiler(1.0 - Q_CLAMP)).collect::<Result<Vec<_>>>()?;
    let columns: Vec<Vec<u64>> = quantilers
        .par_iter()
        .enumerate()
        .map(|(j, qt)| {
            latent.column(j).iter().map(|&z| qt.quantile(std_normal_cdf(z).clamp(Q_CLAMP, 1.0 - Q_CLAMP))).collect()
        })
        .collect();
    Ok(DMatrix::from_fn(latent.nrows(), latent.ncols(), |i, j| columns[j][i]))
}

pub fn norta_counts(spec: &SynthesisSpec) -> Result<CountMatrix> {
    spec.validate()?;
    let latent = sample_mvn(&spec.correlation, spec.n, spec.seed)?;
    CountMatrix::from_values(counts_from_latent(&latent, &spec.marginals)?)
}

/// Per-column KS distance between synthesized counts and their target model.
pub fn marginal_ks(spec: &SynthesisSpec, data: &CountMatrix) -> Result<Vec<f64>> {
    if data.n_taxa() != spec.marginals.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} columns for {} marginals",
            data.n_taxa(),
            spec.marginals.len()
        )));
    }
    (0..data.n_taxa()).into_par_iter().map(|j| ks_statistic(&data.column(j), &spec.marginals[j])).collect()
}

/// A random dense correlation matrix from `W W^T + diag(d)` with `W` standard normal
/// `p x k` and `d ~ U[0.1, 1]`.
pub fn random_correlation(p: usize, k: usize, seed: u64) -> DMatrix<f64> {
    use rand::Rng;
    let mut rng = seed::rng(seed);
    let w = DMatrix::<f64>::from_fn(p, k, |_, _| StandardNormal.sample(&mut rng));
    let mut cov = &w * w.transpose();
    for i in 0..p {
        cov[(i, i)] += rng.random_range(0.1..1.0);
    }
    linalg::cov_to_cor(&cov)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPair {
    pub i: usize,
    pub j: usize,
    pub target: f64,
    pub raw: Option<f64>,
    pub log: Option<f64>,
}

/// Least-squares line of empirical on target correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    /// Set when the targets have no spread, so the line is undefined.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub pairs: Vec<RecoveryPair>,
    pub raw: Agreement,
    pub log: Agreement,
}

fn agreement(pairs: &[(f64, f64)]) -> Agreement {
    let n = pairs.len() as f64;
    let (mx, my) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if pairs.len() < 2 || sxx <= 1e-12 * n {
        return Agreement { slope: None, intercept: None, r2: None, degenerate: true };
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { Some(sxy * sxy / (sxx * syy)) } else { None };
    Agreement { slope: Some(slope), intercept: Some(my - slope * mx), r2, degenerate: false }
}

/// Target versus empirical Pearson correlations for every pair, on raw counts and on
/// `log(1 + counts)`.
pub fn correlation_recovery_report(spec: &SynthesisSpec, data: &CountMatrix) -> Result<RecoveryReport> {
    let p = spec.correlation.nrows();
    if data.n_taxa() != p {
        return Err(Error::DimensionMismatch(format!("{} columns for a {p}x{p} target", data.n_taxa())));
    }
    let raw: Vec<Vec<f64>> = (0..p).map(|j| data.column(j).iter().map(|&u| u as f64).collect()).collect();
    let logged: Vec<Vec<f64>> = raw.iter().map(|c| c.iter().map(|v| v.ln_1p()).collect()).collect();
    let mut pairs = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in (i + 1)..p {
            pairs.push(RecoveryPair {
                i,
                j,
                target: spec.correlation[(i, j)],
                raw: linalg::pearson(&raw[i], &raw[j]),
                log: linalg::pearson(&logged[i], &logged[j]),
            });
        }
    }
    let collect = |f: fn(&RecoveryPair) -> Option<f64>| -> Vec<(f64, f64)> {
        pairs.iter().filter_map(|q| f(q).map(|v| (q.target, v))).collect()
    };
    let raw_fit = agreement(&collect(|q| q.raw));
    let log_fit = agreement(&collect(|q| q.log));
    Ok(RecoveryReport { pairs, raw: raw_fit, log: log_fit })
}
