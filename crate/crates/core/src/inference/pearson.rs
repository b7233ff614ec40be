//! Relevance networks from thresholded Pearson correlation.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{InferredEdge, InferredNetwork, Method};
use crate::compositions::{covariance_of, CovarianceKind};
use crate::error::{Error, Result};
use crate::evaluation::{sort_ranked, RankedEdge};

#[derive(Debug, Clone, PartialEq)]
pub struct PearsonResult {
    pub correlation: DMatrix<f64>,
    pub p_values: DMatrix<f64>,
    pub network: InferredNetwork,
    /// All pairs by ascending p-value, ties broken by larger `|r|`.
    pub ranked: Vec<RankedEdge>,
}

/// Two-sided p-value of `t = r sqrt((n-2)/(1-r^2))` on `n - 2` degrees of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r.abs() * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t)).min(1.0)
}

/// Edge `{i, j}` when `|r_ij| >= threshold`, weighted by `r_ij`. The stability column holds
/// `1 - p`.
pub fn pearson_network(x: &DMatrix<f64>, threshold: f64) -> Result<PearsonResult> {
    let (n, p) = x.shape();
    if n < 3 {
        return Err(Error::InvalidParameter(format!("correlation p-values need n >= 3, got {n}")));
    }
    if !(threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be non-negative, got {threshold}")));
    }
    let r = covariance_of(x, CovarianceKind::Correlation)?.matrix;
    let p_values = DMatrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { pearson_p_value(r[(i, j)], n) });
    let mut edges = Vec::new();
    let mut ranked = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in (i + 1)..p {
            let (rij, pv) = (r[(i, j)], p_values[(i, j)]);
            if rij.abs() >= threshold {
                edges.push(InferredEdge { i, j, weight: rij, stability: 1.0 - pv });
            }
            ranked.push(RankedEdge::new(i, j, -pv, rij.abs()));
        }
    }
    sort_ranked(&mut ranked);
    Ok(PearsonResult { correlation: r, p_values, network: InferredNetwork { p, method: Method::Pearson, rule: None, edges }, ranked })
}
