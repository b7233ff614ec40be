//! File formats: count and dense matrices as TSV, ground-truth graphs, inferred edge lists
//! and fitted marginals as JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::compositions::CountMatrix;
use crate::error::{Error, Result};
use crate::evaluation::{MetricsReport, RankedEdge, TopologyHistogram};
use crate::inference::{InferenceOutput, InferredNetwork};
use crate::marginals::{FitResult, MarginalModel};
use crate::topology::GraphModel;

/// Reals are written with enough digits to round-trip exactly.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// Samples as rows, with a `sample` id column.
pub fn format_count_table(c: &CountMatrix) -> String {
    let mut out = String::from("sample");
    for t in c.taxon_ids() {
        out.push('\t');
        out.push_str(t);
    }
    out.push('\n');
    for (i, id) in c.sample_ids().iter().enumerate() {
        out.push_str(id);
        for j in 0..c.n_taxa() {
            write!(out, "\t{}", c.values()[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_count_table(path: &Path, c: &CountMatrix) -> Result<()> {
    write_text(path, &format_count_table(c))
}

/// Dense matrix with a header of column ids and one id per row.
pub fn format_matrix(m: &DMatrix<f64>, ids: &[String]) -> String {
    let mut out = String::from("id");
    for id in ids {
        out.push('\t');
        out.push_str(id);
    }
    out.push('\n');
    for i in 0..m.nrows() {
        out.push_str(ids.get(i).map_or("", String::as_str));
        for j in 0..m.ncols() {
            out.push('\t');
            out.push_str(&fmt_real(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, line) in text.lines().skip(1).enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells = line
            .split('\t')
            .skip(1)
            .map(|c| c.trim().parse::<f64>().map_err(|_| Error::Malformed(format!("bad number {c:?} in row {r}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(cells);
    }
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Malformed("ragged matrix".into()));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn node_ids(p: usize) -> Vec<String> {
    (0..p).map(|i| i.to_string()).collect()
}

/// Metadata written next to a ground-truth edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphHeader {
    pub p: usize,
    pub e: usize,
    pub kappa_requested: f64,
    pub kappa_achieved: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<String>,
}

/// The JSON header lives next to the edge list with extension `.json`.
pub fn graph_header_path(edges: &Path) -> PathBuf {
    edges.with_extension("json")
}

/// Edge list `i  j  theta_ij`, including the diagonal so the precision matrix can be rebuilt.
pub fn format_graph_edges(g: &GraphModel) -> String {
    let mut out = String::from("i\tj\ttheta\n");
    let p = g.precision.nrows();
    for i in 0..p {
        writeln!(out, "{i}\t{i}\t{}", fmt_real(g.precision[(i, i)])).unwrap();
    }
    for (i, j) in g.adjacency.edges() {
        writeln!(out, "{i}\t{j}\t{}", fmt_real(g.precision[(i, j)])).unwrap();
    }
    out
}

pub fn write_graph_model(edges: &Path, g: &GraphModel, seed: u64, topology: Option<&str>) -> Result<GraphHeader> {
    let header = GraphHeader {
        p: g.precision.nrows(),
        e: g.adjacency.n_edges(),
        kappa_requested: g.kappa_requested,
        kappa_achieved: g.kappa,
        seed,
        topology: topology.map(str::to_string),
    };
    write_text(edges, &format_graph_edges(g))?;
    write_json(&graph_header_path(edges), &header)?;
    Ok(header)
}

pub fn read_graph_model(edges: &Path) -> Result<(GraphModel, GraphHeader)> {
    let header: GraphHeader = read_json(&graph_header_path(edges))?;
    let mut theta = DMatrix::zeros(header.p, header.p);
    for (r, line) in read_text(edges)?.lines().skip(1).enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::Malformed(format!("edge row {r} needs 3 fields")));
        }
        let idx = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Malformed(format!("bad node {s:?} in row {r}")));
        let (i, j) = (idx(f[0])?, idx(f[1])?);
        let v: f64 = f[2].trim().parse().map_err(|_| Error::Malformed(format!("bad weight in row {r}")))?;
        if i >= header.p || j >= header.p {
            return Err(Error::Malformed(format!("node index out of range in row {r}")));
        }
        theta[(i, j)] = v;
        theta[(j, i)] = v;
    }
    let model = GraphModel::from_precision(theta, header.kappa_requested)?;
    if model.adjacency.n_edges() != header.e {
        return Err(Error::Malformed(format!("header lists {} edges, file has {}", header.e, model.adjacency.n_edges())));
    }
    Ok((model, header))
}

pub fn write_correlation(path: &Path, g: &GraphModel) -> Result<()> {
    write_text(path, &format_matrix(&g.correlation, &node_ids(g.correlation.nrows())))
}

/// Inferred edges, all pairs in ranked order: `i  j  weight  stability  rank`. `weight` is
/// non-zero only for pairs in the selected network; tied pairs share the rank of the first
/// member of their block.
pub fn format_inferred(out: &InferenceOutput) -> String {
    let net = &out.network;
    let mut weights = std::collections::HashMap::new();
    for e in &net.edges {
        weights.insert((e.i, e.j), e.weight);
    }
    let mut text = String::from("i\tj\tweight\tstability\trank\n");
    let mut rank = 0;
    for (k, r) in out.ranked.iter().enumerate() {
        if k == 0 || r.score != out.ranked[k - 1].score || r.tiebreak != out.ranked[k - 1].tiebreak {
            rank = k + 1;
        }
        let stability = stability_of(out, r);
        let w = weights.get(&(r.i, r.j)).copied().unwrap_or(0.0);
        writeln!(text, "{}\t{}\t{}\t{}\t{}", r.i, r.j, fmt_real(w), fmt_real(stability), rank).unwrap();
    }
    text
}

fn stability_of(out: &InferenceOutput, r: &RankedEdge) -> f64 {
    match &out.stability {
        Some(sr) => sr.edge_frequency[sr.selected][crate::inference::pair_index(r.i, r.j, out.network.p)],
        // Correlation ranking: score is the negated p-value.
        None => 1.0 + r.score,
    }
}

/// An inferred edge list read back for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct InferredFile {
    pub p: usize,
    pub ranked: Vec<RankedEdge>,
    pub selected: crate::topology::Adjacency,
}

/// Reads an edge list written by [`format_inferred`]. Ranks become scores, so tied blocks
/// are preserved.
pub fn parse_inferred(text: &str, p: usize) -> Result<InferredFile> {
    let mut ranked = Vec::new();
    let mut selected = crate::topology::Adjacency::empty(p);
    for (r, line) in text.lines().skip(1).enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() != 5 {
            return Err(Error::Malformed(format!("edge row {r} needs 5 fields")));
        }
        let bad = |what: &str| Error::Malformed(format!("bad {what} in edge row {r}"));
        let i: usize = f[0].parse().map_err(|_| bad("node"))?;
        let j: usize = f[1].parse().map_err(|_| bad("node"))?;
        let w: f64 = f[2].parse().map_err(|_| bad("weight"))?;
        let rank: usize = f[4].parse().map_err(|_| bad("rank"))?;
        if i >= p || j >= p || i == j {
            return Err(Error::DimensionMismatch(format!("pair ({i}, {j}) invalid for p = {p}")));
        }
        if w != 0.0 {
            selected.insert(i, j)?;
        }
        ranked.push(RankedEdge::new(i, j, -(rank as f64), 0.0));
    }
    Ok(InferredFile { p, ranked, selected })
}

pub fn write_network_json(path: &Path, net: &InferredNetwork) -> Result<()> {
    write_json(path, net)
}

/// Predicted and true topology histograms in long form:
/// `graph  statistic  bin  count  mass`. The disconnected geodesic bin is labelled `inf`.
pub fn format_histograms(report: &MetricsReport) -> String {
    let mut out = String::from("graph\tstatistic\tbin\tcount\tmass\n");
    let mut rows = |graph: &str, hs: &[TopologyHistogram]| {
        for h in hs {
            let name = h.statistic.name();
            for ((b, c), m) in h.bins.iter().zip(&h.counts).zip(&h.masses) {
                writeln!(out, "{graph}\t{name}\t{b}\t{c}\t{}", fmt_real(*m)).unwrap();
            }
            if h.infinite_count > 0 {
                writeln!(out, "{graph}\t{name}\tinf\t{}\t{}", h.infinite_count, fmt_real(h.infinite)).unwrap();
            }
        }
    };
    rows("predicted", &report.histograms);
    rows("truth", &report.truth_histograms);
    out
}

/// One fitted taxon in a marginal file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRecord {
    pub taxon: String,
    #[serde(flatten)]
    pub fit: FitResult,
    #[serde(default)]
    pub qq_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalFile {
    pub marginals: Vec<MarginalRecord>,
}

impl MarginalFile {
    pub fn models(&self) -> Vec<MarginalModel> {
        self.marginals.iter().map(|r| r.fit.model).collect()
    }
}
