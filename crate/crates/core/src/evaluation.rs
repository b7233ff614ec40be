//! Scoring inferred networks against a known graph.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Adjacency;

/// A candidate pair with its ranking key; higher `score` ranks first, `tiebreak` second.
/// Entries with equal `(score, tiebreak)` are treated as a tied block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedEdge {
    pub i: usize,
    pub j: usize,
    pub score: f64,
    pub tiebreak: f64,
}

impl RankedEdge {
    pub fn new(i: usize, j: usize, score: f64, tiebreak: f64) -> Self {
        Self { i: i.min(j), j: i.max(j), score, tiebreak }
    }

    fn key_eq(&self, other: &Self) -> bool {
        self.score == other.score && self.tiebreak == other.tiebreak
    }
}

/// Sorts by `(score, tiebreak)` descending, then by pair.
pub fn sort_ranked(edges: &mut [RankedEdge]) {
    edges.sort_by(|a, b| {
        b.score.total_cmp(&a.score).then(b.tiebreak.total_cmp(&a.tiebreak)).then((a.i, a.j).cmp(&(b.i, b.j)))
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PRCurve {
    /// `(recall, precision)` pairs, starting at recall 0.
    pub points: Vec<(f64, f64)>,
    pub aupr: f64,
}

/// Precision-recall curve over every prefix of the ranking.
///
/// Pairs missing from `ranked` form one tied block at the bottom. Inside a tied block of
/// `m` pairs holding `t` true edges, the true-positive count is the expectation over
/// random orderings of the block, `TP_before + k t / m`. The curve starts at
/// `(0, precision(1))` and the area is integrated by trapezoids over recall.
pub fn precision_recall(ranked: &[RankedEdge], truth: &Adjacency) -> Result<PRCurve> {
    let e = truth.n_edges();
    if e == 0 {
        return Err(Error::Degenerate("ground truth has no edges".into()));
    }
    let p = truth.p();
    let mut seen = vec![false; p * p];
    let mut blocks: Vec<(usize, usize)> = Vec::new(); // (size, true count)
    let mut prev: Option<&RankedEdge> = None;
    for r in ranked {
        if r.i >= p || r.j >= p || r.i == r.j {
            return Err(Error::DimensionMismatch(format!("ranked pair ({}, {}) invalid for p = {p}", r.i, r.j)));
        }
        if std::mem::replace(&mut seen[r.i * p + r.j], true) {
            continue;
        }
        let hit = usize::from(truth.contains(r.i, r.j));
        match (prev, blocks.last_mut()) {
            (Some(q), Some(last)) if q.key_eq(r) => {
                last.0 += 1;
                last.1 += hit;
            }
            _ => blocks.push((1, hit)),
        }
        prev = Some(r);
    }
    let listed_true: usize = blocks.iter().map(|b| b.1).sum();
    let listed: usize = blocks.iter().map(|b| b.0).sum();
    if listed < truth.max_edges() {
        blocks.push((truth.max_edges() - listed, e - listed_true));
    }

    let mut points = Vec::with_capacity(truth.max_edges() + 1);
    let mut k = 0usize;
    let mut tp_before = 0.0;
    for &(m, t) in &blocks {
        for step in 1..=m {
            k += 1;
            let tp = tp_before + step as f64 * t as f64 / m as f64;
            if points.is_empty() {
                points.push((0.0, tp));
            }
            points.push((tp / e as f64, tp / k as f64));
        }
        tp_before += t as f64;
    }
    let aupr = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum::<f64>();
    Ok(PRCurve { points, aupr: aupr.clamp(0.0, 1.0) })
}

/// Number of pairs present in exactly one of the two graphs.
pub fn hamming(a: &Adjacency, b: &Adjacency) -> Result<usize> {
    if a.p() != b.p() {
        return Err(Error::DimensionMismatch(format!("graphs on {} and {} nodes", a.p(), b.p())));
    }
    let only_a = a.edges().filter(|&(i, j)| !b.contains(i, j)).count();
    let only_b = b.edges().filter(|&(i, j)| !a.contains(i, j)).count();
    Ok(only_a + only_b)
}

/// The first `k` pairs of a ranking.
pub fn top_k_network(ranked: &[RankedEdge], p: usize, k: usize) -> Result<Adjacency> {
    if k > ranked.len() {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds the {} ranked pairs", ranked.len())));
    }
    Adjacency::from_edges(p, ranked[..k].iter().map(|r| (r.i, r.j)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Degree,
    Betweenness,
    Geodesic,
    ComponentSize,
}

impl Statistic {
    pub const ALL: [Statistic; 4] =
        [Statistic::Degree, Statistic::Betweenness, Statistic::Geodesic, Statistic::ComponentSize];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Degree => "degree",
            Statistic::Betweenness => "betweenness",
            Statistic::Geodesic => "geodesic",
            Statistic::ComponentSize => "component_size",
        }
    }
}

pub const BETWEENNESS_CELLS: usize = 20;

/// Normalised histogram. `bins` holds integer values, or cell lower edges for betweenness.
/// For geodesics, `infinite` is the mass of disconnected pairs and `masses` are fractions
/// of all pairs, so `sum(masses) + infinite = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyHistogram {
    pub statistic: Statistic,
    pub bins: Vec<f64>,
    pub counts: Vec<u64>,
    pub masses: Vec<f64>,
    pub infinite: f64,
    pub infinite_count: u64,
}

impl TopologyHistogram {
    fn from_counts(statistic: Statistic, bins: Vec<f64>, counts: Vec<u64>, infinite_count: u64) -> Self {
        let total = (counts.iter().sum::<u64>() + infinite_count) as f64;
        let norm = |c: u64| if total > 0.0 { c as f64 / total } else { 0.0 };
        let masses = counts.iter().map(|&c| norm(c)).collect();
        Self { statistic, bins, counts, masses, infinite: norm(infinite_count), infinite_count }
    }

    fn integer(statistic: Statistic, values: &[usize], infinite_count: u64) -> Self {
        let max = values.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0u64; max + 1];
        for &v in values {
            counts[v] += 1;
        }
        Self::from_counts(statistic, (0..=max).map(|v| v as f64).collect(), counts, infinite_count)
    }

    /// Mean of the finite part, computed from integer counts.
    pub fn mean(&self) -> f64 {
        let finite: u64 = self.counts.iter().sum();
        let weighted: f64 = self.bins.iter().zip(&self.counts).map(|(b, &c)| b * c as f64).sum();
        weighted / finite as f64
    }

    /// `(label, mass)` for every bin, with the infinite bin last when present.
    fn labelled(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.bins.iter().copied().zip(self.masses.iter().copied()).collect();
        if self.statistic == Statistic::Geodesic {
            out.push((f64::INFINITY, self.infinite));
        }
        out
    }
}

pub fn degree_distribution(a: &Adjacency) -> TopologyHistogram {
    TopologyHistogram::integer(Statistic::Degree, &a.degrees(), 0)
}

/// Brandes accumulation for unweighted graphs, normalised by `(p-1)(p-2)/2`.
pub fn betweenness(a: &Adjacency) -> Vec<f64> {
    let p = a.p();
    let nb = a.neighbors();
    let mut cb = vec![0.0; p];
    let mut sigma = vec![0.0f64; p];
    let mut dist = vec![-1i64; p];
    let mut delta = vec![0.0f64; p];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); p];
    let mut stack = Vec::with_capacity(p);
    let mut queue = VecDeque::with_capacity(p);
    for s in 0..p {
        for v in 0..p {
            sigma[v] = 0.0;
            dist[v] = -1;
            delta[v] = 0.0;
            preds[v].clear();
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &nb[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    // Each unordered pair was counted from both ends.
    let pairs = if p > 2 { ((p - 1) * (p - 2)) as f64 } else { 1.0 };
    cb.iter().map(|&c| if p > 2 { c / pairs } else { 0.0 }).collect()
}

pub fn betweenness_distribution(a: &Adjacency) -> TopologyHistogram {
    let mut counts = vec![0u64; BETWEENNESS_CELLS];
    for b in betweenness(a) {
        let cell = ((b * BETWEENNESS_CELLS as f64).floor() as usize).min(BETWEENNESS_CELLS - 1);
        counts[cell] += 1;
    }
    let bins = (0..BETWEENNESS_CELLS).map(|k| k as f64 / BETWEENNESS_CELLS as f64).collect();
    TopologyHistogram::from_counts(Statistic::Betweenness, bins, counts, 0)
}

/// Shortest-path lengths for all unordered pairs; `None` when disconnected.
pub fn geodesics(a: &Adjacency) -> Vec<Option<usize>> {
    let p = a.p();
    let nb = a.neighbors();
    let mut out = Vec::with_capacity(a.max_edges());
    let mut dist = vec![usize::MAX; p];
    let mut queue = VecDeque::new();
    for s in 0..p {
        dist.fill(usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &w in &nb[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        out.extend(((s + 1)..p).map(|t| (dist[t] != usize::MAX).then_some(dist[t])));
    }
    out
}

pub fn geodesic_distribution(a: &Adjacency) -> TopologyHistogram {
    let all = geodesics(a);
    let finite: Vec<usize> = all.iter().flatten().copied().collect();
    let infinite = (all.len() - finite.len()) as u64;
    let mut h = TopologyHistogram::integer(Statistic::Geodesic, &finite, infinite);
    // Distance 0 never occurs between distinct nodes.
    if !h.bins.is_empty() {
        h.bins.remove(0);
        h.counts.remove(0);
        h.masses.remove(0);
    }
    h
}

/// Sizes of connected components, largest first.
pub fn component_size_list(a: &Adjacency) -> Vec<usize> {
    let nb = a.neighbors();
    let mut seen = vec![false; a.p()];
    let mut sizes = Vec::new();
    for s in 0..a.p() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![s];
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for &w in &nb[v] {
                if !std::mem::replace(&mut seen[w], true) {
                    stack.push(w);
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Histogram over components of their sizes.
pub fn component_sizes(a: &Adjacency) -> TopologyHistogram {
    let mut h = TopologyHistogram::integer(Statistic::ComponentSize, &component_size_list(a), 0);
    h.bins.remove(0);
    h.counts.remove(0);
    h.masses.remove(0);
    h
}

pub fn distribution(a: &Adjacency, statistic: Statistic) -> TopologyHistogram {
    match statistic {
        Statistic::Degree => degree_distribution(a),
        Statistic::Betweenness => betweenness_distribution(a),
        Statistic::Geodesic => geodesic_distribution(a),
        Statistic::ComponentSize => component_sizes(a),
    }
}

pub const KL_SMOOTHING: f64 = 1e-6;

/// `D_KL(truth || predicted)` over the union of bins, each mass smoothed by `KL_SMOOTHING`
/// and renormalised.
pub fn kl_divergence(predicted: &TopologyHistogram, truth: &TopologyHistogram) -> Result<f64> {
    if predicted.statistic != truth.statistic {
        return Err(Error::DimensionMismatch(format!(
            "histograms of {} and {}",
            predicted.statistic.name(),
            truth.statistic.name()
        )));
    }
    if predicted.statistic == Statistic::Betweenness && predicted.bins != truth.bins {
        return Err(Error::DimensionMismatch("betweenness histograms use different cells".into()));
    }
    let mut joint: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    // Labels are non-negative (or +inf), so their bit patterns sort in numeric order.
    for (label, m) in truth.labelled() {
        joint.entry(label.to_bits()).or_default().0 += m;
    }
    for (label, m) in predicted.labelled() {
        joint.entry(label.to_bits()).or_default().1 += m;
    }
    let k = joint.len() as f64;
    let t_total: f64 = joint.values().map(|v| v.0).sum::<f64>() + k * KL_SMOOTHING;
    let q_total: f64 = joint.values().map(|v| v.1).sum::<f64>() + k * KL_SMOOTHING;
    let d: f64 = joint
        .values()
        .map(|&(t, q)| {
            let (t, q) = ((t + KL_SMOOTHING) / t_total, (q + KL_SMOOTHING) / q_total);
            t * (t / q).ln()
        })
        .sum();
    Ok(d.max(0.0))
}

/// Newman's categorical assortativity coefficient.
pub fn assortativity<L: Ord>(a: &Adjacency, labels: &[L]) -> Result<f64> {
    if labels.len() != a.p() {
        return Err(Error::DimensionMismatch(format!("{} labels for {} nodes", labels.len(), a.p())));
    }
    if a.n_edges() == 0 {
        return Err(Error::Degenerate("assortativity of a graph without edges".into()));
    }
    let mut index: BTreeMap<&L, usize> = BTreeMap::new();
    for l in labels {
        let next = index.len();
        index.entry(l).or_insert(next);
    }
    let k = index.len();
    let mut mix = vec![vec![0.0; k]; k];
    let unit = 1.0 / (2 * a.n_edges()) as f64;
    for (i, j) in a.edges() {
        let (li, lj) = (index[&labels[i]], index[&labels[j]]);
        mix[li][lj] += unit;
        mix[lj][li] += unit;
    }
    let trace: f64 = (0..k).map(|c| mix[c][c]).sum();
    let ab: f64 = (0..k).map(|c| mix[c].iter().sum::<f64>().powi(2)).sum();
    if (1.0 - ab).abs() < 1e-15 {
        return Err(Error::Degenerate("all edge endpoints share one label".into()));
    }
    Ok((trace - ab) / (1.0 - ab))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlSummary {
    pub degree: f64,
    pub betweenness: f64,
    pub geodesic: f64,
    pub component_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub aupr: f64,
    pub pr_points: Vec<(f64, f64)>,
    pub hamming: usize,
    pub histograms: Vec<TopologyHistogram>,
    pub truth_histograms: Vec<TopologyHistogram>,
    pub kl: KlSummary,
    /// Only available when node labels are supplied and the coefficient is defined.
    pub assortativity: Option<f64>,
}

/// Full report. The predicted network is the `top_k` prefix of the ranking, or `predicted`
/// when given (e.g. the selected model).
pub fn evaluate(
    ranked: &[RankedEdge],
    predicted: Option<&Adjacency>,
    truth: &Adjacency,
    top_k: Option<usize>,
    labels: Option<&[String]>,
) -> Result<MetricsReport> {
    let curve = precision_recall(ranked, truth)?;
    let network = match (predicted, top_k) {
        (Some(a), _) => a.clone(),
        (None, k) => top_k_network(ranked, truth.p(), k.unwrap_or(truth.n_edges()).min(ranked.len()))?,
    };
    let histograms: Vec<TopologyHistogram> = Statistic::ALL.iter().map(|&s| distribution(&network, s)).collect();
    let truth_histograms: Vec<TopologyHistogram> = Statistic::ALL.iter().map(|&s| distribution(truth, s)).collect();
    let kl = |k: usize| kl_divergence(&histograms[k], &truth_histograms[k]);
    let kl = KlSummary { degree: kl(0)?, betweenness: kl(1)?, geodesic: kl(2)?, component_size: kl(3)? };
    let assortativity = labels.and_then(|l| assortativity(&network, l).ok());
    Ok(MetricsReport {
        aupr: curve.aupr,
        pr_points: curve.points,
        hamming: hamming(&network, truth)?,
        histograms,
        truth_histograms,
        kl,
        assortativity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::gen_band;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn star4() -> Adjacency {
        Adjacency::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap()
    }

    fn path3() -> Adjacency {
        Adjacency::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    fn strict_ranking(order: &[(usize, usize)]) -> Vec<RankedEdge> {
        let n = order.len();
        order.iter().enumerate().map(|(k, &(i, j))| RankedEdge::new(i, j, (n - k) as f64, 0.0)).collect()
    }

    fn all_pairs(p: usize) -> Vec<(usize, usize)> {
        (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect()
    }

    #[test]
    fn perfect_ranking_has_unit_area() {
        let truth = gen_band(10, 12, 1).unwrap();
        let mut order: Vec<_> = all_pairs(10);
        order.sort_by_key(|&(i, j)| !truth.contains(i, j));
        let c = precision_recall(&strict_ranking(&order), &truth).unwrap();
        assert_abs_diff_eq!(c.aupr, 1.0, epsilon = 1e-12);
        assert!(c.points.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn single_true_edge_first() {
        let truth = Adjacency::from_edges(5, [(1, 3)]).unwrap();
        let mut order = all_pairs(5);
        order.sort_by_key(|&(i, j)| (i, j) != (1, 3));
        let c = precision_recall(&strict_ranking(&order), &truth).unwrap();
        assert_eq!(c.points[1], (1.0, 1.0));
        assert_eq!(c.points[0], (0.0, 1.0));
    }

    #[test]
    fn fully_tied_ranking_equals_density() {
        let truth = gen_band(30, 40, 3).unwrap();
        let ranked: Vec<_> = all_pairs(30).into_iter().map(|(i, j)| RankedEdge::new(i, j, 0.0, 0.0)).collect();
        let c = precision_recall(&ranked, &truth).unwrap();
        assert_abs_diff_eq!(c.aupr, 40.0 / 435.0, epsilon = 1e-12);
        // Unlisted pairs behave as one tied block.
        let c2 = precision_recall(&[], &truth).unwrap();
        assert_abs_diff_eq!(c2.aupr, c.aupr, epsilon = 1e-12);
    }

    #[test]
    fn reversed_ranking_on_sparse_graph() {
        let truth = gen_band(100, 50, 2).unwrap();
        let mut order = all_pairs(100);
        order.sort_by_key(|&(i, j)| truth.contains(i, j));
        let c = precision_recall(&strict_ranking(&order), &truth).unwrap();
        let density = 50.0 / 4950.0;
        assert!((c.aupr - density).abs() < 0.01, "{}", c.aupr);
        // Analytic value: recall climbs over the last e items, precision ~ k/N there.
        assert!((c.aupr - density / 2.0).abs() < 1e-3);
    }

    #[test]
    fn empty_truth_rejected() {
        assert!(precision_recall(&[], &Adjacency::empty(4)).is_err());
    }

    #[test]
    fn hamming_examples() {
        let full = Adjacency::complete(205);
        assert_eq!(hamming(&full, &Adjacency::empty(205)).unwrap(), 20910);
        assert_eq!(hamming(&star4(), &star4()).unwrap(), 0);
        assert_eq!(hamming(&star4(), &path3()).map_err(|e| e.kind()).unwrap_err(), crate::ErrorKind::Data);
    }

    #[test]
    fn degree_examples() {
        let band = gen_band(5, 4, 0).unwrap();
        assert_eq!(band.degrees(), vec![1, 2, 2, 2, 1]);
        assert_eq!(star4().degrees(), vec![3, 1, 1, 1]);
        let h = degree_distribution(&Adjacency::empty(6));
        assert_eq!(h.masses, vec![1.0]);
        let g = gen_band(37, 50, 5).unwrap();
        assert_eq!(degree_distribution(&g).mean(), 2.0 * 50.0 / 37.0);
    }

    #[test]
    fn betweenness_examples() {
        assert_eq!(betweenness(&star4()), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(betweenness(&path3()), vec![0.0, 1.0, 0.0]);
        assert!(betweenness(&Adjacency::complete(6)).iter().all(|&b| b == 0.0));
        // Cycle of 4: each node lies on half of the one opposite pair's shortest paths.
        let c4 = Adjacency::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        for b in betweenness(&c4) {
            assert_abs_diff_eq!(b, 0.5 / 3.0, epsilon = 1e-12);
        }
        let h = betweenness_distribution(&star4());
        assert_eq!(h.counts[0], 3);
        assert_eq!(h.counts[BETWEENNESS_CELLS - 1], 1);
    }

    #[test]
    fn geodesic_examples() {
        let mut d: Vec<_> = geodesics(&path3()).into_iter().flatten().collect();
        d.sort();
        assert_eq!(d, vec![1, 1, 2]);
        let h = geodesic_distribution(&Adjacency::complete(4));
        assert_eq!((h.bins.clone(), h.counts.clone()), (vec![1.0], vec![6]));
        let two = Adjacency::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let h = geodesic_distribution(&two);
        assert_eq!((h.counts.clone(), h.infinite_count), (vec![2], 4));
        assert_abs_diff_eq!(h.masses.iter().sum::<f64>() + h.infinite, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn component_examples() {
        let two_cliques = Adjacency::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert_eq!(component_size_list(&two_cliques), vec![3, 3]);
        assert_eq!(component_size_list(&Adjacency::empty(5)), vec![1; 5]);
        let h = component_sizes(&path3());
        assert_eq!((h.bins, h.masses), (vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0]));
    }

    #[test]
    fn kl_examples() {
        let a = degree_distribution(&star4());
        assert!(kl_divergence(&a, &a).unwrap() < 1e-9);
        let h = |c: Vec<u64>| TopologyHistogram::from_counts(Statistic::Degree, vec![0.0, 1.0], c, 0);
        let (p, q) = (h(vec![9, 1]), h(vec![1, 1]));
        let (pq, qp) = (kl_divergence(&q, &p).unwrap(), kl_divergence(&p, &q).unwrap());
        // Hand values: 0.9 ln 1.8 + 0.1 ln 0.2 and 0.5 ln(5/9) + 0.5 ln 5.
        assert_abs_diff_eq!(pq, 0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln(), epsilon = 1e-5);
        assert_abs_diff_eq!(qp, 0.5 * (5.0f64 / 9.0).ln() + 0.5 * 5.0f64.ln(), epsilon = 1e-5);
        assert!((pq - qp).abs() > 0.1);
        let disjoint = kl_divergence(&h(vec![1, 0]), &h(vec![0, 1])).unwrap();
        assert!(disjoint.is_finite() && disjoint > 10.0);
        let b = betweenness_distribution(&star4());
        assert!(kl_divergence(&a, &b).is_err());
    }

    #[test]
    fn assortativity_examples() {
        let g = Adjacency::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_abs_diff_eq!(assortativity(&g, &["a", "a", "b", "b"]).unwrap(), 1.0, epsilon = 1e-12);
        let k22 = Adjacency::from_edges(4, [(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        assert_abs_diff_eq!(assortativity(&k22, &["a", "a", "b", "b"]).unwrap(), -1.0, epsilon = 1e-12);
        assert!(assortativity(&k22, &["a"; 4]).is_err());
        assert!(assortativity(&Adjacency::empty(4), &["a", "b", "a", "b"]).is_err());
    }

    #[test]
    fn top_k_examples() {
        let truth = gen_band(8, 9, 0).unwrap();
        let mut order = all_pairs(8);
        order.sort_by_key(|&(i, j)| !truth.contains(i, j));
        let r = strict_ranking(&order);
        assert_eq!(top_k_network(&r, 8, 0).unwrap().n_edges(), 0);
        assert_eq!(top_k_network(&r, 8, 9).unwrap(), truth);
        assert!(top_k_network(&r, 8, 29).is_err());
    }

    fn arb_graph(p: usize) -> impl Strategy<Value = Adjacency> {
        proptest::collection::vec(any::<bool>(), p * (p - 1) / 2).prop_map(move |bits| {
            let pairs = all_pairs(p);
            Adjacency::from_edges(p, pairs.into_iter().zip(bits).filter(|(_, b)| *b).map(|(e, _)| e)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric(a in arb_graph(7), b in arb_graph(7), c in arb_graph(7)) {
            let d = |x: &Adjacency, y: &Adjacency| hamming(x, y).unwrap();
            prop_assert_eq!(d(&a, &a), 0);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
            prop_assert_eq!(d(&a, &b) == 0, a == b);
        }

        #[test]
        fn swapping_a_true_edge_up_never_hurts(truth in arb_graph(6), perm in Just(all_pairs(6)).prop_shuffle(), pos in 0usize..14) {
            prop_assume!(truth.n_edges() > 0);
            let base = precision_recall(&strict_ranking(&perm), &truth).unwrap().aupr;
            let (a, b) = (perm[pos], perm[pos + 1]);
            if !truth.contains(a.0, a.1) && truth.contains(b.0, b.1) {
                let mut better = perm.clone();
                better.swap(pos, pos + 1);
                let improved = precision_recall(&strict_ranking(&better), &truth).unwrap().aupr;
                prop_assert!(improved >= base - 1e-12);
            }
            prop_assert!((0.0..=1.0).contains(&base));
        }

        #[test]
        fn degree_mean_is_exact(g in arb_graph(9)) {
            prop_assert_eq!(degree_distribution(&g).mean(), 2.0 * g.n_edges() as f64 / 9.0);
        }

        #[test]
        fn kl_nonnegative_and_zero_only_on_equal(a in arb_graph(6), b in arb_graph(6)) {
            for s in Statistic::ALL {
                let (ha, hb) = (distribution(&a, s), distribution(&b, s));
                let d = kl_divergence(&ha, &hb).unwrap();
                prop_assert!(d >= 0.0);
                prop_assert_eq!(d < 1e-12, ha.labelled() == hb.labelled() || {
                    // Equal masses under different integer ranges are still equal distributions.
                    let nz = |h: &TopologyHistogram| h.labelled().into_iter().filter(|x| x.1 > 0.0).collect::<Vec<_>>();
                    nz(&ha) == nz(&hb)
                });
            }
        }
    }
}
