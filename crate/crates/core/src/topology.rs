//! Ground-truth graphs and the precision / correlation matrices built on them.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;

/// Undirected simple graph on nodes `0..p`; pairs are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Adjacency {
    pub fn empty(p: usize) -> Self {
        Self { p, edges: BTreeSet::new() }
    }

    pub fn complete(p: usize) -> Self {
        Self::from_edges(p, (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))).unwrap()
    }

    pub fn from_edges(p: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut a = Self::empty(p);
        for (i, j) in pairs {
            a.insert(i, j)?;
        }
        Ok(a)
    }

    /// Inserts `{i, j}`; returns whether it was new.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<bool> {
        if i == j {
            return Err(Error::InvalidParameter(format!("self-loop on node {i}")));
        }
        if i >= self.p || j >= self.p {
            return Err(Error::InvalidParameter(format!("edge ({i}, {j}) outside 0..{}", self.p)));
        }
        Ok(self.edges.insert((i.min(j), i.max(j))))
    }

    pub fn remove(&mut self, i: usize, j: usize) -> bool {
        self.edges.remove(&(i.min(j), i.max(j)))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn max_edges(&self) -> usize {
        self.p * (self.p.saturating_sub(1)) / 2
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.p];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.p];
        for &(i, j) in &self.edges {
            nb[i].push(j);
            nb[j].push(i);
        }
        nb
    }

    /// Applies a node relabelling `new = perm[old]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_edges(self.p, self.edges.iter().map(|&(i, j)| (perm[i], perm[j]))).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Band,
    Cluster,
    ScaleFree,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::Band => "band",
            Topology::Cluster => "cluster",
            Topology::ScaleFree => "scale_free",
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "band" => Ok(Topology::Band),
            "cluster" => Ok(Topology::Cluster),
            "scale_free" | "scalefree" => Ok(Topology::ScaleFree),
            _ => Err(Error::InvalidParameter(format!("unknown topology {s:?}"))),
        }
    }
}

/// Default number of clusters, `ceil(p / 34)`.
pub fn default_clusters(p: usize) -> usize {
    p.div_ceil(34).max(1)
}

fn check_edge_budget(p: usize, e: usize) -> Result<()> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("need p >= 2, got {p}")));
    }
    let max = p * (p - 1) / 2;
    if e > max {
        return Err(Error::Infeasible(format!("{e} edges requested but only {max} pairs exist for p = {p}")));
    }
    Ok(())
}

/// Band graph: whole off-diagonals are filled (distance 1, 2, ...) while the remaining
/// budget covers the next one, then edges are randomly added or removed to reach `e`.
pub fn gen_band(p: usize, e: usize, seed: u64) -> Result<Adjacency> {
    check_edge_budget(p, e)?;
    if e == 0 {
        return Err(Error::Infeasible("band graph needs at least one edge".into()));
    }
    let mut a = Adjacency::empty(p);
    let mut available = e;
    for dist in 1..p {
        let len = p - dist;
        if available < len {
            break;
        }
        for i in 0..len {
            a.insert(i, i + dist)?;
        }
        available -= len;
    }
    Ok(adjust_edge_count(&a, e, seed))
}

/// Component sizes for `h` near-equal groups: the first `p mod h` get one extra node.
pub fn cluster_sizes(p: usize, h: usize) -> Vec<usize> {
    (0..h).map(|k| p / h + usize::from(k < p % h)).collect()
}

/// `h` disjoint Erdős–Rényi components, then random additions/removals to exactly `e` edges.
pub fn gen_cluster(p: usize, e: usize, h: usize, seed: u64) -> Result<Adjacency> {
    check_edge_budget(p, e)?;
    if h == 0 || h > p {
        return Err(Error::InvalidParameter(format!("cluster count must lie in 1..={p}, got {h}")));
    }
    if e < h {
        return Err(Error::Infeasible(format!("{e} edges cannot populate {h} clusters")));
    }
    let sizes = cluster_sizes(p, h);
    let capacity: usize = sizes.iter().map(|s| s * (s - 1) / 2).sum();
    if e > capacity {
        return Err(Error::Infeasible(format!("{e} edges exceed the {capacity} within-cluster pairs")));
    }
    let mut rng = seed::rng(seed);
    let per_component = e as f64 / h as f64;
    let mut a = Adjacency::empty(p);
    let mut start = 0;
    for &s in &sizes {
        let pairs = s * s.saturating_sub(1) / 2;
        if pairs > 0 {
            let prob = (per_component / pairs as f64).min(1.0);
            for i in start..start + s {
                for j in (i + 1)..start + s {
                    if rng.random::<f64>() < prob {
                        a.insert(i, j)?;
                    }
                }
            }
        }
        start += s;
    }
    Ok(adjust_edge_count(&a, e, seed.wrapping_add(1)))
}

/// Preferential attachment with one edge per arriving node: a tree with `p - 1` edges.
pub fn gen_scale_free(p: usize, seed: u64) -> Result<Adjacency> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("need p >= 2, got {p}")));
    }
    let mut rng = seed::rng(seed);
    let mut a = Adjacency::empty(p);
    // Every edge endpoint appears once here, so a uniform pick is degree-proportional.
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * p);
    a.insert(0, 1)?;
    endpoints.extend([0, 1]);
    for node in 2..p {
        let target = endpoints[rng.random_range(0..endpoints.len())];
        a.insert(node, target)?;
        endpoints.extend([node, target]);
    }
    Ok(a)
}

/// Uniformly removes edges, or adds absent pairs, until exactly `e` edges remain.
pub fn adjust_edge_count(a: &Adjacency, e: usize, seed: u64) -> Adjacency {
    let mut out = a.clone();
    let e = e.min(a.max_edges());
    let current = a.n_edges();
    let mut rng = seed::rng(seed);
    if current > e {
        let list: Vec<(usize, usize)> = a.edges().collect();
        for k in index::sample(&mut rng, list.len(), current - e) {
            out.remove(list[k].0, list[k].1);
        }
    } else if current < e {
        let absent: Vec<(usize, usize)> =
            (0..a.p).flat_map(|i| ((i + 1)..a.p).map(move |j| (i, j))).filter(|&(i, j)| !a.contains(i, j)).collect();
        for k in index::sample(&mut rng, absent.len(), e - current) {
            out.edges.insert(absent[k]);
        }
    }
    out
}

pub fn generate(topology: Topology, p: usize, e: usize, clusters: usize, seed: u64) -> Result<Adjacency> {
    match topology {
        Topology::Band => gen_band(p, e, seed),
        Topology::Cluster => gen_cluster(p, e, clusters, seed),
        Topology::ScaleFree => {
            check_edge_budget(p, e)?;
            Ok(adjust_edge_count(&gen_scale_free(p, seed)?, e, seed.wrapping_add(1)))
        }
    }
}

/// Ground truth: a graph with its precision, covariance and correlation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphModel {
    pub adjacency: Adjacency,
    pub precision: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    pub correlation: DMatrix<f64>,
    pub kappa: f64,
    pub kappa_requested: f64,
}

impl GraphModel {
    /// Rebuilds the derived matrices from a precision matrix.
    pub fn from_precision(precision: DMatrix<f64>, kappa_requested: f64) -> Result<Self> {
        let p = precision.nrows();
        let mut adjacency = Adjacency::empty(p);
        for i in 0..p {
            for j in (i + 1)..p {
                if precision[(i, j)] != 0.0 {
                    adjacency.insert(i, j)?;
                }
            }
        }
        let kappa = linalg::condition_number(&precision)?;
        let covariance = linalg::inverse_pd(&precision)?;
        let correlation = linalg::cov_to_cor(&covariance);
        Ok(Self { adjacency, precision, covariance, correlation, kappa, kappa_requested })
    }
}

const KAPPA_TOL: f64 = 0.01;

/// Weights each edge uniformly from `[-theta_max, -theta_min] U [theta_min, theta_max]` (sign
/// with probability 1/2) and picks a common diagonal `c` by bisection so that
/// `cond(Theta) = kappa`.
pub fn make_precision(a: &Adjacency, theta_min: f64, theta_max: f64, kappa: f64, seed: u64) -> Result<GraphModel> {
    if a.n_edges() == 0 {
        return Err(Error::InvalidParameter("precision construction needs at least one edge".into()));
    }
    if !(theta_min > 0.0 && theta_max > theta_min) {
        return Err(Error::InvalidParameter(format!("need 0 < theta_min < theta_max, got {theta_min}, {theta_max}")));
    }
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("condition number must exceed 1, got {kappa}")));
    }
    let p = a.p();
    let mut rng = seed::rng(seed);
    let mut theta = DMatrix::zeros(p, p);
    for (i, j) in a.edges() {
        let magnitude = rng.random_range(theta_min..=theta_max);
        let w = if rng.random::<bool>() { magnitude } else { -magnitude };
        theta[(i, j)] = w;
        theta[(j, i)] = w;
    }

    let ev = linalg::sym_eigenvalues(&theta);
    let (lo, hi) = (ev[0], ev[p - 1]);
    let cond_at = |c: f64| (hi + c) / (lo + c);
    // cond decreases monotonically in c on (-lo, inf), from +inf down to 1.
    let mut c_low = -lo;
    let mut c_high = -lo + (hi - lo).max(1.0);
    let mut guard = 0;
    while cond_at(c_high) > kappa {
        c_high = -lo + 2.0 * (c_high + lo);
        guard += 1;
        if guard > 200 {
            return Err(Error::ConditionUnreachable { requested: kappa, low: 1.0, high: f64::INFINITY });
        }
    }
    let mut c = c_high;
    for _ in 0..200 {
        c = 0.5 * (c_low + c_high);
        let k = cond_at(c);
        if (k / kappa - 1.0).abs() < 1e-12 {
            break;
        }
        if k > kappa {
            c_low = c;
        } else {
            c_high = c;
        }
    }
    for i in 0..p {
        theta[(i, i)] = c;
    }
    let model = GraphModel::from_precision(theta, kappa)?;
    if (model.kappa / kappa - 1.0).abs() > KAPPA_TOL {
        return Err(Error::ConditionUnreachable { requested: kappa, low: 1.0, high: f64::INFINITY });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn edge_vec(a: &Adjacency) -> Vec<(usize, usize)> {
        a.edges().collect()
    }

    #[test]
    fn band_fill_rule() {
        assert_eq!(edge_vec(&gen_band(5, 4, 0).unwrap()), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        let b = gen_band(5, 7, 0).unwrap();
        assert_eq!(edge_vec(&b), vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4)]);
        let c = gen_band(4, 5, 0).unwrap();
        assert_eq!(edge_vec(&c), vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]);
        assert!(gen_band(4, 7, 0).is_err());
        assert!(gen_band(4, 0, 0).is_err());
        // 68 + 0: first diagonal (67) then one random extra edge.
        let d = gen_band(68, 68, 9).unwrap();
        assert_eq!(d.n_edges(), 68);
        assert!((0..67).all(|i| d.contains(i, i + 1)));
    }

    #[test]
    fn cluster_layout() {
        assert_eq!(cluster_sizes(10, 2), vec![5, 5]);
        assert_eq!(cluster_sizes(9, 2), vec![5, 4]);
        let one = gen_cluster(12, 15, 1, 3).unwrap();
        assert_eq!(one.n_edges(), 15);
        let g = gen_cluster(68, 68, 2, 5).unwrap();
        assert_eq!(g.n_edges(), 68);
        assert!(gen_cluster(6, 7, 2, 0).is_err());
        assert!(gen_cluster(6, 1, 2, 0).is_err());
    }

    #[test]
    fn cluster_components_do_not_cross_before_adjustment() {
        // With p_edge = 1 every component is complete and already has exactly e edges.
        let g = gen_cluster(10, 20, 2, 7).unwrap();
        assert_eq!(g.n_edges(), 20);
        assert!(g.edges().all(|(i, j)| (i < 5) == (j < 5)));
    }

    #[test]
    fn scale_free_is_a_tree() {
        assert_eq!(edge_vec(&gen_scale_free(2, 4).unwrap()), vec![(0, 1)]);
        for seed in 0..50 {
            let g = gen_scale_free(40, seed).unwrap();
            assert_eq!(g.n_edges(), 39);
            let sizes = crate::evaluation::component_size_list(&g);
            assert_eq!(sizes, vec![40]);
        }
    }

    #[test]
    fn scale_free_has_hubs() {
        let mut wins = 0;
        for seed in 0..10_000u64 {
            let g = gen_scale_free(50, seed).unwrap();
            if g.degrees().into_iter().max().unwrap() > 2 {
                wins += 1;
            }
        }
        assert!(wins >= 9900, "{wins}");
    }

    #[test]
    fn adjustment_contract() {
        let g = gen_scale_free(12, 1).unwrap();
        assert_eq!(adjust_edge_count(&g, g.n_edges(), 3), g);
        assert_eq!(adjust_edge_count(&g, 0, 3).n_edges(), 0);
        assert_eq!(adjust_edge_count(&g, 66, 3), Adjacency::complete(12));
        let fewer = adjust_edge_count(&g, 5, 3);
        assert!(fewer.edges().all(|(i, j)| g.contains(i, j)));
        let more = adjust_edge_count(&g, 20, 3);
        assert!(g.edges().all(|(i, j)| more.contains(i, j)));
    }

    #[test]
    fn precision_two_node_closed_form() {
        let a = Adjacency::from_edges(2, [(0, 1)]).unwrap();
        let m = make_precision(&a, 2.0, 3.0, 10.0, 1).unwrap();
        let (c, w) = (m.precision[(0, 0)], m.precision[(0, 1)].abs());
        let closed = (c + w) / (c - w);
        assert_abs_diff_eq!(closed, m.kappa, epsilon = 1e-8);
        assert!((m.kappa / 10.0 - 1.0).abs() < 0.01);
        assert!((2.0..=3.0).contains(&w));
    }

    #[test]
    fn precision_matches_shift_formula() {
        // For Theta = A + cI the exact shift is c = (l_max - kappa l_min) / (kappa - 1).
        let a = gen_band(20, 25, 2).unwrap();
        let m = make_precision(&a, 2.0, 3.0, 100.0, 4).unwrap();
        let mut off = m.precision.clone();
        off.fill_diagonal(0.0);
        let ev = linalg::sym_eigenvalues(&off);
        let expected = (ev[19] - 100.0 * ev[0]) / 99.0;
        assert_abs_diff_eq!(m.precision[(0, 0)], expected, epsilon = 1e-6 * expected.abs());
    }

    #[test]
    fn precision_support_and_scaling() {
        let a = gen_cluster(30, 30, 3, 8).unwrap();
        let m = make_precision(&a, 2.0, 3.0, 10.0, 8).unwrap();
        assert_eq!(m.adjacency, a);
        for i in 0..30 {
            assert_abs_diff_eq!(m.correlation[(i, i)], 1.0, epsilon = 1e-12);
            for j in 0..30 {
                assert!(m.correlation[(i, j)].abs() <= 1.0);
                if i != j && a.contains(i, j) {
                    let w = m.precision[(i, j)].abs();
                    assert!((2.0..=3.0).contains(&w));
                }
            }
        }
        assert!(linalg::is_positive_definite(&m.precision));
        assert!(make_precision(&Adjacency::empty(3), 2.0, 3.0, 10.0, 0).is_err());
        assert!(make_precision(&a, 3.0, 2.0, 10.0, 0).is_err());
        assert!(make_precision(&a, 2.0, 3.0, 1.0, 0).is_err());
    }

    #[test]
    fn larger_kappa_strengthens_correlations() {
        let mut concordant = 0;
        for seed in 0..20 {
            let a = gen_band(30, 30, seed).unwrap();
            let mean_abs = |kappa: f64| {
                let m = make_precision(&a, 2.0, 3.0, kappa, seed).unwrap();
                let mut s = 0.0;
                for i in 0..30 {
                    for j in (i + 1)..30 {
                        s += m.correlation[(i, j)].abs();
                    }
                }
                s / 435.0
            };
            if mean_abs(100.0) > mean_abs(10.0) {
                concordant += 1;
            }
        }
        assert_eq!(concordant, 20);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn precision_keeps_support_and_definiteness(
            p in 4usize..24,
            density in 1usize..3,
            cluster in any::<bool>(),
            kappa in 2.0f64..500.0,
            seed in any::<u64>(),
        ) {
            let e = (density * p).min(p * (p - 1) / 2 - 1);
            let a = if cluster { gen_cluster(p, e.min(p), 1, seed).unwrap() } else { gen_band(p, e, seed).unwrap() };
            let m = make_precision(&a, 2.0, 3.0, kappa, seed).unwrap();
            for i in 0..p {
                for j in (i + 1)..p {
                    prop_assert_eq!(m.precision[(i, j)] != 0.0, a.contains(i, j));
                    prop_assert_eq!(m.precision[(i, j)], m.precision[(j, i)]);
                }
                prop_assert_eq!(m.correlation[(i, i)], 1.0);
            }
            prop_assert!(m.precision.clone().cholesky().is_some());
            prop_assert!(m.correlation.iter().all(|v| (-1.0..=1.0).contains(v)));
            prop_assert!((m.kappa - kappa).abs() <= KAPPA_TOL * kappa);
        }
    }
}
