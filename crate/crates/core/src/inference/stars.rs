//! Stability-based penalty selection over random subsamples.

use nalgebra::DMatrix;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Estimator, LambdaPath};
use crate::topology::Adjacency;
use crate::error::{Error, Result};
use crate::evaluation::{sort_ranked, RankedEdge};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarsOptions {
    pub subsamples: usize,
    pub fraction: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for StarsOptions {
    fn default() -> Self {
        Self { subsamples: 50, fraction: 0.8, beta: 0.05, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StarsWarning {
    /// Even the head of the path exceeds the bound; the path minimum is returned.
    NoLambdaMeetsBound,
    /// The whole path stays below the bound, so the selection sits at the path minimum.
    WholePathStable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    /// Penalties actually evaluated, a prefix of the path.
    pub lambdas: Vec<f64>,
    /// `edge_frequency[k][pair_index(i, j)]`: share of subsamples selecting `{i, j}` at `lambdas[k]`.
    pub edge_frequency: Vec<Vec<f64>>,
    pub instability: Vec<f64>,
    /// Running maximum of `instability` from the head of the path.
    pub monotonized: Vec<f64>,
    pub selected: usize,
    pub lambda_selected: f64,
    pub subsamples: usize,
    pub subsample_fraction: f64,
    pub beta: f64,
    pub warning: Option<StarsWarning>,
}

pub fn pair_count(p: usize) -> usize {
    p * (p - 1) / 2
}

/// Position of `{i, j}` in lexicographic pair order.
pub fn pair_index(i: usize, j: usize, p: usize) -> usize {
    let (i, j) = (i.min(j), i.max(j));
    i * (2 * p - i - 1) / 2 + (j - i - 1)
}

/// `count` sorted index sets of size `floor(fraction * n)`, drawn without replacement.
pub fn subsample_indices(n: usize, fraction: f64, count: usize, master: u64) -> Result<Vec<Vec<usize>>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("subsample fraction must lie in (0, 1], got {fraction}")));
    }
    let b = (fraction * n as f64).floor() as usize;
    if b < 10 {
        return Err(Error::InvalidParameter(format!("subsamples of {b} rows are too small (need at least 10)")));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("need at least one subsample".into()));
    }
    Ok((0..count)
        .map(|k| {
            let mut rng = seed::rng(seed::derive_seed(master, &[&"stars", &k]));
            let mut idx = index::sample(&mut rng, n, b).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect())
}

/// Edge frequencies and instability over the given subsamples, then selection.
///
/// The instability `D` is made monotone by a running maximum from the sparse end, and the
/// smallest penalty whose monotone instability stays within `beta` is selected. The walk
/// down the path stops at the first penalty past the bound, so `lambdas` may be a prefix
/// of the path.
pub fn stars_from_subsamples(
    z: &DMatrix<f64>,
    estimator: &Estimator,
    path: &LambdaPath,
    subsamples: &[Vec<usize>],
    beta: f64,
) -> Result<StabilityResult> {
    if !(beta > 0.0 && beta <= 0.5) {
        return Err(Error::InvalidParameter(format!("instability bound must lie in (0, 0.5], got {beta}")));
    }
    let p = z.ncols();
    let pairs = pair_count(p);
    let mut states = subsamples
        .par_iter()
        .map(|rows| estimator.second_moment(&z.select_rows(rows.iter())).map(|s| estimator.path_state(s)))
        .collect::<Result<Vec<_>>>()?;
    let total = subsamples.len() as f64;
    let (mut lambdas, mut edge_frequency, mut instability, mut monotonized) = (vec![], vec![], vec![], vec![]);
    for &lambda in &path.values {
        let supports = states.par_iter_mut().map(|st| st.step(lambda)).collect::<Result<Vec<Adjacency>>>()?;
        // Sequential accumulation keeps the sums independent of scheduling.
        let mut counts = vec![0u32; pairs];
        for a in &supports {
            for (i, j) in a.edges() {
                counts[pair_index(i, j, p)] += 1;
            }
        }
        let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
        let d = freq.iter().map(|&t| 2.0 * t * (1.0 - t)).sum::<f64>() / pairs as f64;
        let m = monotonized.last().map_or(d, |&prev: &f64| prev.max(d));
        lambdas.push(lambda);
        edge_frequency.push(freq);
        instability.push(d);
        monotonized.push(m);
        // Past the bound nothing further down the path can be selected.
        if m > beta && monotonized[0] <= beta {
            break;
        }
    }
    let within = monotonized.iter().take_while(|&&d| d <= beta).count();
    let last = lambdas.len() - 1;
    let (selected, warning) = match within {
        0 => (last, Some(StarsWarning::NoLambdaMeetsBound)),
        w if w == path.values.len() => (last, Some(StarsWarning::WholePathStable)),
        w => (w - 1, None),
    };
    Ok(StabilityResult {
        lambdas,
        edge_frequency,
        instability,
        monotonized,
        selected,
        lambda_selected: path.values[selected],
        subsamples: subsamples.len(),
        subsample_fraction: subsamples.first().map_or(0.0, |s| s.len() as f64 / z.nrows() as f64),
        beta,
        warning,
    })
}

/// Path whose head is the largest `lambda_max` over the full data and every subsample,
/// so that the head is empty in every fit.
pub fn stars_path(
    z: &DMatrix<f64>,
    estimator: &Estimator,
    subsamples: &[Vec<usize>],
    count: usize,
    ratio: f64,
) -> Result<LambdaPath> {
    let full = estimator.lambda_max(&estimator.second_moment(z)?);
    let sub = subsamples
        .par_iter()
        .map(|rows| estimator.second_moment(&z.select_rows(rows.iter())).map(|s| estimator.lambda_max(&s)))
        .collect::<Result<Vec<f64>>>()?;
    LambdaPath::log_spaced(sub.into_iter().fold(full, f64::max), ratio, count)
}

pub fn stars_select(
    z: &DMatrix<f64>,
    estimator: &Estimator,
    path: &LambdaPath,
    opts: &StarsOptions,
) -> Result<StabilityResult> {
    let subsamples = subsample_indices(z.nrows(), opts.fraction, opts.subsamples, opts.seed)?;
    let mut sr = stars_from_subsamples(z, estimator, path, &subsamples, opts.beta)?;
    sr.subsample_fraction = opts.fraction;
    Ok(sr)
}

/// All pairs by frequency at the selected penalty, then by frequency summed over the
/// path, then lexicographically.
pub fn rank_edges(sr: &StabilityResult, p: usize) -> Vec<RankedEdge> {
    let mut out = Vec::with_capacity(pair_count(p));
    for i in 0..p {
        for j in (i + 1)..p {
            let k = pair_index(i, j, p);
            let total: f64 = sr.edge_frequency.iter().map(|row| row[k]).sum();
            out.push(RankedEdge::new(i, j, sr.edge_frequency[sr.selected][k], total));
        }
    }
    sort_ranked(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{lambda_path, GlassoInput, GlassoOptions, Rule};
    use crate::norta::sample_mvn;
    use crate::topology::{gen_band, make_precision};

    fn data(p: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let a = gen_band(p, p, seed).unwrap();
        let m = make_precision(&a, 2.0, 3.0, 10.0, seed).unwrap();
        sample_mvn(&m.correlation, n, seed + 7).unwrap()
    }

    fn mb() -> Estimator {
        Estimator::Mb { rule: Rule::Union }
    }

    #[test]
    fn pair_index_is_lexicographic() {
        let p = 6;
        let mut k = 0;
        for i in 0..p {
            for j in (i + 1)..p {
                assert_eq!(pair_index(i, j, p), k);
                assert_eq!(pair_index(j, i, p), k);
                k += 1;
            }
        }
        assert_eq!(k, pair_count(p));
    }

    #[test]
    fn subsamples_are_deterministic_and_sized() {
        let a = subsample_indices(100, 0.8, 5, 3).unwrap();
        assert_eq!(a, subsample_indices(100, 0.8, 5, 3).unwrap());
        assert!(a.iter().all(|s| s.len() == 80 && s.windows(2).all(|w| w[0] < w[1])));
        assert_ne!(a[0], a[1]);
        assert!(subsample_indices(12, 0.8, 5, 3).is_err());
    }

    #[test]
    fn instability_bounds_and_selection() {
        let z = data(10, 150, 1);
        let opts = StarsOptions { subsamples: 12, ..Default::default() };
        let subs = subsample_indices(150, 0.8, 12, 0).unwrap();
        let path = stars_path(&z, &mb(), &subs, 20, 0.01).unwrap();
        let s = mb().second_moment(&z).unwrap();
        assert!(path.lambda_max >= lambda_path(&s, &mb(), 20, 0.01).unwrap().lambda_max);
        let sr = stars_select(&z, &mb(), &path, &opts).unwrap();
        assert!(sr.instability.iter().all(|&d| (0.0..=0.5).contains(&d)));
        assert!(sr.edge_frequency.iter().flatten().all(|&f| (0.0..=1.0).contains(&f)));
        assert!(sr.edge_frequency[0].iter().all(|&f| f == 0.0));
        assert!(sr.monotonized.windows(2).all(|w| w[0] <= w[1]));
        assert!(sr.monotonized[sr.selected] <= sr.beta);
        if sr.selected + 1 < sr.lambdas.len() {
            assert!(sr.monotonized[sr.selected + 1] > sr.beta);
        }
        assert_eq!(sr, stars_select(&z, &mb(), &path, &opts).unwrap());
    }

    #[test]
    fn glasso_head_frequencies_vanish_on_correlation_input() {
        // Subsample correlations can exceed the full-data maximum, so the head is
        // guaranteed empty only when the path starts at 1, the largest possible value.
        let est = Estimator::Glasso { input: GlassoInput::Correlation, options: GlassoOptions::default() };
        let z = data(8, 120, 2);
        let path = LambdaPath::log_spaced(1.0, 0.05, 8).unwrap();
        let sr = stars_select(&z, &est, &path, &StarsOptions { subsamples: 8, ..Default::default() }).unwrap();
        assert!(sr.edge_frequency[0].iter().all(|&f| f == 0.0));
        assert!(sr.instability[0] == 0.0);
    }

    #[test]
    fn instability_contributions() {
        // One pair always present, one present in half the subsamples.
        let mk = |pairs: &[f64]| pairs.iter().map(|&t| 2.0 * t * (1.0 - t)).collect::<Vec<_>>();
        assert_eq!(mk(&[1.0, 0.5, 0.0]), vec![0.0, 0.5, 0.0]);
    }

    #[test]
    fn duplicated_rows_with_aligned_subsamples() {
        let z = data(8, 60, 5);
        let n = z.nrows();
        let doubled = DMatrix::from_fn(2 * n, 8, |i, j| z[(i % n, j)]);
        let path = LambdaPath::log_spaced(mb().lambda_max(&mb().second_moment(&z).unwrap()), 0.05, 12).unwrap();
        let subs = subsample_indices(n, 0.8, 10, 4).unwrap();
        let aligned: Vec<Vec<usize>> = subs.iter().map(|s| s.iter().copied().chain(s.iter().map(|&i| i + n)).collect()).collect();
        let a = stars_from_subsamples(&z, &mb(), &path, &subs, 0.05).unwrap();
        let b = stars_from_subsamples(&doubled, &mb(), &path, &aligned, 0.05).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.edge_frequency, b.edge_frequency);
    }

    #[test]
    fn ranking_order() {
        let sr = StabilityResult {
            lambdas: vec![1.0, 0.5],
            edge_frequency: vec![vec![0.0, 0.2, 0.0], vec![0.4, 1.0, 0.4]],
            instability: vec![0.0, 0.0],
            monotonized: vec![0.0, 0.0],
            selected: 1,
            lambda_selected: 0.5,
            subsamples: 5,
            subsample_fraction: 0.8,
            beta: 0.05,
            warning: None,
        };
        let r = rank_edges(&sr, 3);
        let order: Vec<(usize, usize)> = r.iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(order, vec![(0, 2), (0, 1), (1, 2)]);
        let zero = StabilityResult { edge_frequency: vec![vec![0.0; 3], vec![0.0; 3]], ..sr };
        let order: Vec<(usize, usize)> = rank_edges(&zero, 3).iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(order, vec![(0, 1), (0, 2), (1, 2)]);
    }
}
