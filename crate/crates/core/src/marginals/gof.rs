//! Goodness-of-fit summaries for fitted count models.

use super::MarginalModel;
use crate::error::{Error, Result};
use crate::linalg::pearson;

/// Squared correlation between the sorted observations and model quantiles at
/// plotting positions `(k - 0.5) / n`.
pub fn qq_r2(observed: &[u64], m: &MarginalModel) -> Result<f64> {
    if observed.is_empty() {
        return Err(Error::Degenerate("empty sample".into()));
    }
    let mut sorted: Vec<f64> = observed.iter().map(|&u| u as f64).collect();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Degenerate("observed counts are constant".into()));
    }
    let qt = m.quantiler(1.0 - 1e-12)?;
    let n = sorted.len() as f64;
    let theoretical: Vec<f64> = (0..sorted.len()).map(|k| qt.quantile((k as f64 + 0.5) / n) as f64).collect();
    Ok(pearson(&sorted, &theoretical).map_or(0.0, |r| r * r))
}

/// Kolmogorov-Smirnov distance between the empirical CDF and the exact discrete CDF.
pub fn ks_statistic(observed: &[u64], m: &MarginalModel) -> Result<f64> {
    if observed.is_empty() {
        return Err(Error::Degenerate("empty sample".into()));
    }
    m.validate()?;
    let mut sorted = observed.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let max = sorted[sorted.len() - 1];
    // Both CDFs are step functions with jumps at integers only.
    let mut d: f64 = 0.0;
    let mut cum = 0.0;
    let mut idx = 0;
    for u in 0..=max {
        cum += m.ln_pmf(u).exp();
        while idx < sorted.len() && sorted[idx] <= u {
            idx += 1;
        }
        d = d.max((idx as f64 / n - cum.min(1.0)).abs());
    }
    Ok(d)
}

/// Asymptotic two-sided KS critical value `sqrt(-ln(alpha/2) / 2) / sqrt(n)`.
/// Conservative for discrete distributions.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::{fit_mle, sample, Family};

    #[test]
    fn exact_quantiles_give_unit_r2() {
        let m = MarginalModel::NegBinom { r: 2.0, p: 0.7 };
        let qt = m.quantiler(1.0 - 1e-12).unwrap();
        let n = 400;
        let obs: Vec<u64> = (0..n).map(|k| qt.quantile((k as f64 + 0.5) / n as f64)).collect();
        assert!((qq_r2(&obs, &m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_sample_rejected() {
        let m = MarginalModel::Poisson { lambda: 2.0 };
        assert!(qq_r2(&[3, 3, 3], &m).is_err());
        assert!(qq_r2(&[], &m).is_err());
    }

    #[test]
    fn self_consistent_sample_scores_high() {
        let m = MarginalModel::ZiNegBinom { phi: 0.4, r: 0.8, p: 0.95 };
        let obs = sample(&m, 5000, 17).unwrap();
        assert!(qq_r2(&obs, &m).unwrap() >= 0.98);
        assert!(ks_statistic(&obs, &m).unwrap() <= ks_critical_value(obs.len(), 0.01));
    }

    #[test]
    fn poisson_misfits_overdispersed_data() {
        let m = MarginalModel::ZiNegBinom { phi: 0.5, r: 0.7, p: 0.97 };
        let obs = sample(&m, 3000, 4).unwrap();
        let pois = fit_mle(&obs, Family::Poisson).unwrap();
        let zinb = fit_mle(&obs, Family::ZiNegBinom).unwrap();
        let (rp, rz) = (qq_r2(&obs, &pois.model).unwrap(), qq_r2(&obs, &zinb.model).unwrap());
        assert!(rp + 0.1 < rz, "poisson {rp} vs zinb {rz}");
    }

    #[test]
    fn ks_detects_wrong_model() {
        let obs = sample(&MarginalModel::Poisson { lambda: 5.0 }, 2000, 1).unwrap();
        let d = ks_statistic(&obs, &MarginalModel::Poisson { lambda: 6.0 }).unwrap();
        assert!(d > ks_critical_value(obs.len(), 0.01));
    }
}
