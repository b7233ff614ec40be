//! Parametric count distributions used as NorTA marginals.
//!
//! Five families are supported: a discretised log-normal, Poisson, zero-inflated
//! Poisson, negative binomial and zero-inflated negative binomial. The NB pmf is
//! `Gamma(r+u) / (u! Gamma(r)) p^u (1-p)^r`, so `p` multiplies the count and the
//! mean is `r p / (1 - p)`.

mod fit;
mod gof;
mod optim;

pub use fit::{fit_mle, log_likelihood, FitResult};
pub use gof::{ks_critical_value, ks_statistic, qq_r2};
pub use optim::{minimize_box, OptimResult};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LogNormal,
    Poisson,
    ZiPoisson,
    NegBinom,
    ZiNegBinom,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::LogNormal, Family::Poisson, Family::ZiPoisson, Family::NegBinom, Family::ZiNegBinom];

    pub fn name(self) -> &'static str {
        match self {
            Family::LogNormal => "log_normal",
            Family::Poisson => "poisson",
            Family::ZiPoisson => "zi_poisson",
            Family::NegBinom => "neg_binom",
            Family::ZiNegBinom => "zi_neg_binom",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        Ok(match key.as_str() {
            "lognormal" | "lnorm" => Family::LogNormal,
            "poisson" | "pois" => Family::Poisson,
            "zipoisson" | "zip" | "zipois" => Family::ZiPoisson,
            "negbinom" | "nb" | "negativebinomial" => Family::NegBinom,
            "zinegbinom" | "zinb" => Family::ZiNegBinom,
            _ => return Err(Error::InvalidParameter(format!("unknown family {s:?}"))),
        })
    }
}

/// A count distribution with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum MarginalModel {
    LogNormal { mu: f64, sigma: f64 },
    Poisson { lambda: f64 },
    ZiPoisson { phi: f64, lambda: f64 },
    NegBinom { r: f64, p: f64 },
    ZiNegBinom { phi: f64, r: f64, p: f64 },
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF through the complementary error function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn ln_poisson(lambda: f64, u: u64) -> f64 {
    let uf = u as f64;
    if u == 0 {
        -lambda
    } else {
        uf * lambda.ln() - lambda - ln_gamma(uf + 1.0)
    }
}

fn ln_negbinom(r: f64, p: f64, u: u64) -> f64 {
    let uf = u as f64;
    let tail = r * (-p).ln_1p();
    if u == 0 {
        tail
    } else {
        ln_gamma(r + uf) - ln_gamma(r) - ln_gamma(uf + 1.0) + uf * p.ln() + tail
    }
}

fn zero_inflate(phi: f64, base: f64, u: u64) -> f64 {
    let keep = (-phi).ln_1p();
    if u == 0 {
        log_sum_exp(phi.ln(), keep + base)
    } else {
        keep + base
    }
}

impl MarginalModel {
    pub fn family(&self) -> Family {
        match self {
            MarginalModel::LogNormal { .. } => Family::LogNormal,
            MarginalModel::Poisson { .. } => Family::Poisson,
            MarginalModel::ZiPoisson { .. } => Family::ZiPoisson,
            MarginalModel::NegBinom { .. } => Family::NegBinom,
            MarginalModel::ZiNegBinom { .. } => Family::ZiNegBinom,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("{what} in {self:?}")));
        let phi_ok = |phi: f64| (0.0..1.0).contains(&phi);
        let p_ok = |p: f64| p > 0.0 && p < 1.0;
        match *self {
            MarginalModel::LogNormal { mu, sigma } => {
                if !mu.is_finite() {
                    return bad("mu must be finite");
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad("sigma must be positive");
                }
            }
            MarginalModel::Poisson { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return bad("lambda must be positive");
                }
            }
            MarginalModel::ZiPoisson { phi, lambda } => {
                if !phi_ok(phi) {
                    return bad("phi must lie in [0, 1)");
                }
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return bad("lambda must be positive");
                }
            }
            MarginalModel::NegBinom { r, p } => {
                if !(r > 0.0 && r.is_finite()) {
                    return bad("r must be positive");
                }
                if !p_ok(p) {
                    return bad("p must lie in (0, 1)");
                }
            }
            MarginalModel::ZiNegBinom { phi, r, p } => {
                if !phi_ok(phi) {
                    return bad("phi must lie in [0, 1)");
                }
                if !(r > 0.0 && r.is_finite()) {
                    return bad("r must be positive");
                }
                if !p_ok(p) {
                    return bad("p must lie in (0, 1)");
                }
            }
        }
        Ok(())
    }

    /// Log of P(U = u) without parameter validation.
    ///
    /// The log-normal is discretised by rounding: count `u` receives the mass of
    /// `[u - 0.5, u + 0.5)` (`[0, 0.5)` for zero).
    pub fn ln_pmf(&self, u: u64) -> f64 {
        match *self {
            MarginalModel::LogNormal { mu, sigma } => ln_lognormal_cell(mu, sigma, u),
            MarginalModel::Poisson { lambda } => ln_poisson(lambda, u),
            MarginalModel::ZiPoisson { phi, lambda } => zero_inflate(phi, ln_poisson(lambda, u), u),
            MarginalModel::NegBinom { r, p } => ln_negbinom(r, p, u),
            MarginalModel::ZiNegBinom { phi, r, p } => zero_inflate(phi, ln_negbinom(r, p, u), u),
        }
    }

    /// CDF without validation: a closed form for the log-normal, a running sum otherwise.
    pub fn cdf_unchecked(&self, u: u64) -> f64 {
        match *self {
            MarginalModel::LogNormal { mu, sigma } => std_normal_cdf(((u as f64 + 0.5).ln() - mu) / sigma),
            _ => (0..=u).map(|k| self.ln_pmf(k).exp()).sum::<f64>().min(1.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarginalModel::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            MarginalModel::Poisson { lambda } => lambda,
            MarginalModel::ZiPoisson { phi, lambda } => (1.0 - phi) * lambda,
            MarginalModel::NegBinom { r, p } => r * p / (1.0 - p),
            MarginalModel::ZiNegBinom { phi, r, p } => (1.0 - phi) * r * p / (1.0 - p),
        }
    }

    /// Builds a reusable inverse-CDF evaluator (cumulative table for the discrete families).
    pub fn quantiler(&self, q_max: f64) -> Result<Quantiler> {
        self.validate()?;
        Ok(Quantiler::new(*self, q_max))
    }
}

fn ln_lognormal_cell(mu: f64, sigma: f64, u: u64) -> f64 {
    let uf = u as f64;
    let hi = ((uf + 0.5).ln() - mu) / sigma;
    let mass = if u == 0 {
        std_normal_cdf(hi)
    } else {
        let lo = ((uf - 0.5).ln() - mu) / sigma;
        if lo > 0.0 {
            std_normal_sf(lo) - std_normal_sf(hi)
        } else {
            std_normal_cdf(hi) - std_normal_cdf(lo)
        }
    };
    if mass > 0.0 {
        mass.ln()
    } else {
        // Far tail: fall back to the continuous density at u times the unit cell width.
        let z = (uf.max(0.25).ln() - mu) / sigma;
        -0.5 * z * z - uf.max(0.25).ln() - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// `log P(U = u)`.
pub fn log_mass(m: &MarginalModel, u: u64) -> Result<f64> {
    m.validate()?;
    Ok(m.ln_pmf(u))
}

/// `P(U <= u)`.
pub fn cdf(m: &MarginalModel, u: u64) -> Result<f64> {
    m.validate()?;
    Ok(m.cdf_unchecked(u))
}

/// Generalised inverse: the smallest `u` with `cdf(u) >= q`.
pub fn quantile(m: &MarginalModel, q: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("quantile level must lie in [0, 1), got {q}")));
    }
    m.validate()?;
    Ok(search_quantile(m, q))
}

fn search_quantile(m: &MarginalModel, q: f64) -> u64 {
    if m.cdf_unchecked(0) >= q {
        return 0;
    }
    if let MarginalModel::LogNormal { .. } = m {
        // Exponential bracketing then bisection on the closed-form CDF.
        let mut hi = 1u64;
        while m.cdf_unchecked(hi) < q {
            hi = hi.saturating_mul(2);
            if hi == u64::MAX {
                return hi;
            }
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if m.cdf_unchecked(mid) >= q {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return hi;
    }
    let mut acc = 0.0;
    let mut u = 0u64;
    loop {
        acc += m.ln_pmf(u).exp();
        if acc >= q {
            return u;
        }
        u += 1;
    }
}

/// Inverse CDF with precomputed cumulative masses, for bulk evaluation.
///
/// Levels are clamped to `q_max`, which bounds the table length.
#[derive(Debug, Clone)]
pub struct Quantiler {
    model: MarginalModel,
    q_max: f64,
    table: Vec<f64>,
}

impl Quantiler {
    fn new(model: MarginalModel, q_max: f64) -> Self {
        let q_max = q_max.min(1.0 - 1e-15);
        let mut table = Vec::new();
        if !matches!(model, MarginalModel::LogNormal { .. }) {
            let mut acc = 0.0;
            let mut u = 0u64;
            loop {
                acc += model.ln_pmf(u).exp();
                table.push(acc);
                if acc >= q_max {
                    break;
                }
                u += 1;
            }
        }
        Self { model, q_max, table }
    }

    pub fn model(&self) -> &MarginalModel {
        &self.model
    }

    pub fn quantile(&self, q: f64) -> u64 {
        let q = q.clamp(0.0, self.q_max);
        if self.table.is_empty() {
            return search_quantile(&self.model, q);
        }
        self.table.partition_point(|&c| c < q).min(self.table.len() - 1) as u64
    }
}

/// `n` i.i.d. draws by inverse-CDF sampling; deterministic in `seed`.
pub fn sample(m: &MarginalModel, n: usize, seed: u64) -> Result<Vec<u64>> {
    let qt = m.quantiler(1.0 - 1e-12)?;
    let mut rng = seed::rng(seed);
    Ok((0..n).map(|_| qt.quantile(rng.random::<f64>())).collect())
}
