//! Maximum-likelihood fitting of the count families.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::optim::{minimize_box, OptimResult};
use super::{Family, MarginalModel};
use crate::error::{Error, Result};
use crate::seed;

const POS_MIN: f64 = 1e-6;
const PHI_MAX: f64 = 1.0 - 1e-6;
const P_MAX: f64 = 1.0 - 1e-6;
const MU_RANGE: f64 = 50.0;
const SIGMA_MAX: f64 = 100.0;
const LAMBDA_MAX: f64 = 1e9;
const R_MAX: f64 = 1e6;

const GRADIENT_TOL: f64 = 1e-6;
const MAX_ITER: usize = 1000;
const RESTARTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub model: MarginalModel,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Total log-likelihood of `counts` under `m`.
pub fn log_likelihood(m: &MarginalModel, counts: &[u64]) -> Result<f64> {
    m.validate()?;
    Ok(tabulate(counts).iter().map(|&(u, w)| w * m.ln_pmf(u)).sum())
}

fn tabulate(counts: &[u64]) -> Vec<(u64, f64)> {
    let mut table = BTreeMap::new();
    for &c in counts {
        *table.entry(c).or_insert(0usize) += 1;
    }
    table.into_iter().map(|(u, k)| (u, k as f64)).collect()
}

/// Optimiser coordinates: log scale for the positive parameters, identity otherwise.
/// The boxes below are exactly the natural-parameter boxes mapped through those transforms.
fn bounds(family: Family) -> (Vec<f64>, Vec<f64>) {
    let ln_min = POS_MIN.ln();
    match family {
        Family::LogNormal => (vec![-MU_RANGE, ln_min], vec![MU_RANGE, SIGMA_MAX.ln()]),
        Family::Poisson => (vec![ln_min], vec![LAMBDA_MAX.ln()]),
        Family::ZiPoisson => (vec![0.0, ln_min], vec![PHI_MAX, LAMBDA_MAX.ln()]),
        Family::NegBinom => (vec![ln_min, POS_MIN], vec![R_MAX.ln(), P_MAX]),
        Family::ZiNegBinom => (vec![0.0, ln_min, POS_MIN], vec![PHI_MAX, R_MAX.ln(), P_MAX]),
    }
}

fn to_model(family: Family, x: &[f64]) -> MarginalModel {
    match family {
        Family::LogNormal => MarginalModel::LogNormal { mu: x[0], sigma: x[1].exp() },
        Family::Poisson => MarginalModel::Poisson { lambda: x[0].exp() },
        Family::ZiPoisson => MarginalModel::ZiPoisson { phi: x[0], lambda: x[1].exp() },
        Family::NegBinom => MarginalModel::NegBinom { r: x[0].exp(), p: x[1] },
        Family::ZiNegBinom => MarginalModel::ZiNegBinom { phi: x[0], r: x[1].exp(), p: x[2] },
    }
}

struct Moments {
    mean: f64,
    var: f64,
    zero_frac: f64,
}

fn moments(table: &[(u64, f64)], n: f64) -> Moments {
    let mean = table.iter().map(|&(u, w)| w * u as f64).sum::<f64>() / n;
    let var = table.iter().map(|&(u, w)| w * (u as f64 - mean).powi(2)).sum::<f64>() / n;
    let zero_frac = table.iter().find(|&&(u, _)| u == 0).map_or(0.0, |&(_, w)| w / n);
    Moments { mean, var, zero_frac }
}

fn nb_moments(mean: f64, var: f64) -> (f64, f64) {
    let mean = mean.max(POS_MIN);
    if var > mean * (1.0 + 1e-9) {
        let p = 1.0 - mean / var;
        (mean * mean / (var - mean), p)
    } else {
        let r = 1e3;
        (r, mean / (mean + r))
    }
}

/// Method-of-moments starting point in optimiser coordinates.
fn initial_point(family: Family, table: &[(u64, f64)], n: f64) -> Vec<f64> {
    let m = moments(table, n);
    let x = match family {
        Family::LogNormal => {
            let logs: Vec<(f64, f64)> = table.iter().map(|&(u, w)| ((u as f64).max(0.5).ln(), w)).collect();
            let mu = logs.iter().map(|(l, w)| l * w).sum::<f64>() / n;
            let var = logs.iter().map(|(l, w)| w * (l - mu).powi(2)).sum::<f64>() / n;
            vec![mu, var.sqrt().max(0.05).ln()]
        }
        Family::Poisson => vec![m.mean.max(POS_MIN).ln()],
        Family::ZiPoisson => {
            let phi = (m.zero_frac - (-m.mean).exp()).max(0.0);
            let phi = phi.min(0.95);
            vec![phi, (m.mean / (1.0 - phi)).max(POS_MIN).ln()]
        }
        Family::NegBinom => {
            let (r, p) = nb_moments(m.mean, m.var);
            vec![r.ln(), p]
        }
        Family::ZiNegBinom => {
            let (r, p) = nb_moments(m.mean, m.var);
            let nb_zero = (1.0 - p).powf(r);
            let phi = if nb_zero < 1.0 { ((m.zero_frac - nb_zero) / (1.0 - nb_zero)).max(0.0) } else { 0.0 };
            let phi = phi.min(0.95);
            // re-derive the count component from the moments of the non-inflated part
            let mean_c = m.mean / (1.0 - phi);
            let second = (m.var + m.mean * m.mean) / (1.0 - phi);
            let (r, p) = nb_moments(mean_c, second - mean_c * mean_c);
            vec![phi, r.ln(), p]
        }
    };
    let (lo, hi) = bounds(family);
    x.iter().zip(lo.iter().zip(&hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect()
}

/// Fits `family` to the counts by maximum likelihood under box constraints.
///
/// Non-convergence is reported in the result rather than raised.
pub fn fit_mle(counts: &[u64], family: Family) -> Result<FitResult> {
    if counts.is_empty() {
        return Err(Error::Degenerate("no counts to fit".into()));
    }
    let table = tabulate(counts);
    let n = counts.len() as f64;
    let all_zero = table.len() == 1 && table[0].0 == 0;
    let zero_inflated = matches!(family, Family::ZiPoisson | Family::ZiNegBinom);
    if all_zero && !zero_inflated {
        return Err(Error::Degenerate(format!("all-zero counts cannot be fit by {}", family.name())));
    }
    if matches!(family, Family::NegBinom | Family::ZiNegBinom) && table.len() < 2 {
        return Err(Error::Degenerate("negative binomial fits need at least two distinct values".into()));
    }

    if family == Family::Poisson {
        let lambda = (moments(&table, n).mean).clamp(POS_MIN, LAMBDA_MAX);
        let model = MarginalModel::Poisson { lambda };
        let ll = table.iter().map(|&(u, w)| w * model.ln_pmf(u)).sum();
        return Ok(FitResult { model, log_likelihood: ll, converged: true, iterations: 0 });
    }

    let objective = |x: &[f64]| -> f64 {
        let m = to_model(family, x);
        -table.iter().map(|&(u, w)| w * m.ln_pmf(u)).sum::<f64>() / n
    };
    let (lower, upper) = bounds(family);
    let start = initial_point(family, &table, n);

    let mut best: OptimResult = minimize_box(objective, &start, &lower, &upper, GRADIENT_TOL, MAX_ITER);
    let mut iterations = best.iterations;
    if !best.converged {
        let mut rng = seed::rng(0x5eed ^ counts.len() as u64);
        for _ in 0..RESTARTS {
            let trial_start: Vec<f64> = start
                .iter()
                .zip(lower.iter().zip(&upper))
                .map(|(&s, (&l, &h))| {
                    let z: f64 = rng.sample(StandardNormal);
                    let width = (h - l).min(2.0);
                    (s + 0.25 * width * z).clamp(l, h)
                })
                .collect();
            let r = minimize_box(objective, &trial_start, &lower, &upper, GRADIENT_TOL, MAX_ITER);
            iterations += r.iterations;
            let better = r.value < best.value || (r.converged && !best.converged && r.value <= best.value + 1e-12);
            if better {
                best = r;
            }
            if best.converged {
                break;
            }
        }
    }

    let model = to_model(family, &best.x);
    let log_likelihood = -best.value * n;
    Ok(FitResult { model, log_likelihood, converged: best.converged && log_likelihood.is_finite(), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::sample;

    #[test]
    fn poisson_mle_is_sample_mean() {
        let counts = [0, 1, 2, 3, 3, 7, 4];
        let fit = fit_mle(&counts, Family::Poisson).unwrap();
        let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
        assert_eq!(fit.model, MarginalModel::Poisson { lambda: mean });
        assert!(fit.converged);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_mle(&[], Family::NegBinom).is_err());
        assert!(matches!(fit_mle(&[0, 0, 0], Family::Poisson), Err(Error::Degenerate(_))));
        assert!(matches!(fit_mle(&[0, 0, 0], Family::NegBinom), Err(Error::Degenerate(_))));
        assert!(matches!(fit_mle(&[4, 4, 4], Family::ZiNegBinom), Err(Error::Degenerate(_))));
        let zip = fit_mle(&[0, 0, 0], Family::ZiPoisson).unwrap();
        assert!(zip.log_likelihood > -1e-4);
    }

    /// Coarse-grid oracle: the fitted likelihood must dominate every grid point.
    fn grid_points(family: Family) -> Vec<MarginalModel> {
        let mut out = Vec::new();
        let phis = [0.0, 0.1, 0.3, 0.5, 0.7];
        let rs = [0.2, 0.5, 1.0, 2.0, 5.0, 20.0];
        let ps = [0.1, 0.3, 0.5, 0.6, 0.7, 0.9, 0.97];
        let lambdas = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
        match family {
            Family::LogNormal => {
                for i in 0..25 {
                    for j in 1..20 {
                        out.push(MarginalModel::LogNormal { mu: -1.0 + 0.2 * i as f64, sigma: 0.15 * j as f64 });
                    }
                }
            }
            Family::Poisson => lambdas.iter().for_each(|&lambda| out.push(MarginalModel::Poisson { lambda })),
            Family::ZiPoisson => {
                for &phi in &phis {
                    for &lambda in &lambdas {
                        out.push(MarginalModel::ZiPoisson { phi, lambda });
                    }
                }
            }
            Family::NegBinom => {
                for &r in &rs {
                    for &p in &ps {
                        out.push(MarginalModel::NegBinom { r, p });
                    }
                }
            }
            Family::ZiNegBinom => {
                for &phi in &phis {
                    for &r in &rs {
                        for &p in &ps {
                            out.push(MarginalModel::ZiNegBinom { phi, r, p });
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn fits_dominate_parameter_grid() {
        let truth = MarginalModel::ZiNegBinom { phi: 0.3, r: 1.5, p: 0.7 };
        let counts = sample(&truth, 800, 3).unwrap();
        for family in Family::ALL {
            let fit = fit_mle(&counts, family).unwrap();
            assert!(fit.converged, "{family:?} {fit:?}");
            for m in grid_points(family) {
                let ll = log_likelihood(&m, &counts).unwrap();
                assert!(fit.log_likelihood >= ll - 1e-6, "{family:?}: {fit:?} vs {m:?} ({ll})");
            }
        }
    }

    #[test]
    fn lognormal_matches_fine_grid_oracle() {
        let truth = MarginalModel::LogNormal { mu: 2.0, sigma: 0.6 };
        let counts: Vec<u64> = sample(&truth, 2000, 8).unwrap().into_iter().map(|u| u.max(1)).collect();
        let fit = fit_mle(&counts, Family::LogNormal).unwrap();
        assert!(fit.converged);

        // Refining grid search over (mu, sigma) around the continuous-model initializer.
        let logs: Vec<f64> = counts.iter().map(|&u| (u as f64).ln()).collect();
        let mu0 = logs.iter().sum::<f64>() / logs.len() as f64;
        let sd0 = (logs.iter().map(|l| (l - mu0).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
        let (mut cmu, mut csd, mut width) = (mu0, sd0, 0.5);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..30 {
            let mut arg = (cmu, csd);
            for i in -10..=10 {
                for j in -10..=10 {
                    let mu = cmu + width * i as f64 / 10.0;
                    let sigma = csd + width * j as f64 / 10.0;
                    if sigma <= 0.0 {
                        continue;
                    }
                    let ll = log_likelihood(&MarginalModel::LogNormal { mu, sigma }, &counts).unwrap();
                    if ll > best {
                        best = ll;
                        arg = (mu, sigma);
                    }
                }
            }
            (cmu, csd) = arg;
            width *= 0.3;
        }
        assert!((fit.log_likelihood - best).abs() < 1e-6, "{} vs {best}", fit.log_likelihood);
        if let MarginalModel::LogNormal { mu, sigma } = fit.model {
            assert!((mu - cmu).abs() < 1e-3 && (sigma - csd).abs() < 1e-3);
        }
    }

    #[test]
    fn zinb_recovers_truth() {
        let truth = MarginalModel::ZiNegBinom { phi: 0.3, r: 2.0, p: 0.6 };
        let counts = sample(&truth, 5000, 2024).unwrap();
        let fit = fit_mle(&counts, Family::ZiNegBinom).unwrap();
        assert!(fit.converged);
        let MarginalModel::ZiNegBinom { phi, r, p } = fit.model else { panic!() };
        assert!((phi - 0.3).abs() <= 0.05, "phi {phi}");
        assert!((r - 2.0).abs() <= 0.3, "r {r}");
        assert!((p - 0.6).abs() <= 0.05, "p {p}");
    }

    #[test]
    fn serialises_flat_record() {
        let fit = fit_mle(&[0, 1, 1, 2, 5], Family::Poisson).unwrap();
        let v = serde_json::to_value(fit).unwrap();
        assert_eq!(v["family"], "poisson");
        assert!(v["params"]["lambda"].is_number());
        assert_eq!(v["converged"], true);
        let back: FitResult = serde_json::from_value(v).unwrap();
        assert_eq!(back, fit);
    }
}
