//! Benchmark grid over topologies, dimensions, sample sizes and condition numbers, plus the
//! hub toy example and the split-half reproducibility experiment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compositions::{quantile_linear, CountMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, hamming, MetricsReport};
use crate::inference::{infer, infer_matrix, InferConfig, Method, StarsOptions};
use crate::io::{self, MarginalFile};
use crate::marginals::MarginalModel;
use crate::norta::{counts_from_latent, sample_mvn};
use crate::seed::{self, derive_seed};
use crate::topology::{default_clusters, generate, make_precision, Adjacency, GraphModel, Topology};

/// Where benchmark marginals come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalSource {
    /// Fitted marginals, assigned to nodes in column order.
    File(PathBuf),
    /// Zero-inflated negative binomials with parameters drawn per replicate from
    /// [`SyntheticRanges`].
    Synthetic(SyntheticRanges),
}

impl Default for MarginalSource {
    fn default() -> Self {
        MarginalSource::Synthetic(SyntheticRanges::default())
    }
}

/// Zero-inflation `phi` is uniform; size `r` and the mean of the count part are
/// log-uniform over their ranges. Draws whose total zero mass exceeds `max_zero_mass` are
/// rejected, mirroring a prevalence filter on real taxa (0.4 keeps taxa present in more
/// than 60% of samples).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRanges {
    pub phi: (f64, f64),
    pub r: (f64, f64),
    pub mean: (f64, f64),
    #[serde(default = "default_max_zero_mass")]
    pub max_zero_mass: f64,
}

fn default_max_zero_mass() -> f64 {
    0.4
}

impl Default for SyntheticRanges {
    fn default() -> Self {
        Self { phi: (0.2, 0.7), r: (0.3, 3.0), mean: (1.0, 200.0), max_zero_mass: default_max_zero_mass() }
    }
}

const MAX_REJECTIONS: usize = 100_000;

pub fn synthetic_marginals(ranges: &SyntheticRanges, p: usize, seed: u64) -> Result<Vec<MarginalModel>> {
    let ok = |(lo, hi): (f64, f64), min: f64| lo >= min && lo <= hi && hi.is_finite();
    if !(ok(ranges.phi, 0.0) && ranges.phi.1 < 1.0 && ok(ranges.r, f64::MIN_POSITIVE) && ok(ranges.mean, f64::MIN_POSITIVE)) {
        return Err(Error::InvalidParameter(format!("invalid synthetic marginal ranges {ranges:?}")));
    }
    if !(ranges.max_zero_mass > ranges.phi.0 && ranges.max_zero_mass <= 1.0) {
        return Err(Error::InvalidParameter(format!("max_zero_mass must lie in (phi_min, 1], got {}", ranges.max_zero_mass)));
    }
    let mut rng = seed::rng(seed);
    let log_uniform = |(lo, hi): (f64, f64), rng: &mut seed::Rng| (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
    let mut draw = || {
        for _ in 0..MAX_REJECTIONS {
            let phi = ranges.phi.0 + rng.random::<f64>() * (ranges.phi.1 - ranges.phi.0);
            let r = log_uniform(ranges.r, &mut rng);
            let m = log_uniform(ranges.mean, &mut rng);
            let model = MarginalModel::ZiNegBinom { phi, r, p: m / (m + r) };
            if model.ln_pmf(0).exp() <= ranges.max_zero_mass {
                return Ok(model);
            }
        }
        Err(Error::Infeasible(format!("no marginal in {ranges:?} meets the zero-mass bound")))
    };
    (0..p).map(|_| draw()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub topologies: Vec<Topology>,
    pub p_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub kappas: Vec<f64>,
    #[serde(default = "default_theta_min")]
    pub theta_min: f64,
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default)]
    pub marginal_source: MarginalSource,
    /// Edge count; defaults to `p`.
    #[serde(default)]
    pub edges: Option<usize>,
    #[serde(default)]
    pub stars_subsamples: Option<usize>,
    #[serde(default)]
    pub nlambda: Option<usize>,
}

fn default_theta_min() -> f64 {
    2.0
}

fn default_theta_max() -> f64 {
    3.0
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            topologies: vec![Topology::Band, Topology::Cluster, Topology::ScaleFree],
            p_values: vec![68],
            n_values: vec![34, 102, 680],
            kappas: vec![10.0, 100.0],
            theta_min: 2.0,
            theta_max: 3.0,
            replicates: 5,
            methods: Method::ALL.to_vec(),
            seed: 0,
            marginal_source: MarginalSource::default(),
            edges: None,
            stars_subsamples: None,
            nlambda: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("topologies", self.topologies.is_empty()),
            ("p_values", self.p_values.is_empty()),
            ("n_values", self.n_values.is_empty()),
            ("kappas", self.kappas.is_empty()),
            ("methods", self.methods.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidParameter(format!("{name} must not be empty")));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be at least 1".into()));
        }
        if self.n_values.iter().any(|&n| n < 3) || self.p_values.iter().any(|&p| p < 2) {
            return Err(Error::InvalidParameter("need n >= 3 and p >= 2".into()));
        }
        if self.kappas.iter().any(|&k| !(k > 1.0) || !k.is_finite()) {
            return Err(Error::InvalidParameter("condition numbers must exceed 1".into()));
        }
        if !(self.theta_min > 0.0 && self.theta_min <= self.theta_max && self.theta_max.is_finite()) {
            return Err(Error::InvalidParameter("need 0 < theta_min <= theta_max".into()));
        }
        if self.stars_subsamples == Some(0) || self.nlambda == Some(0) {
            return Err(Error::InvalidParameter("subsample and path counts must be positive".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        seed::sha256_hex(serde_json::to_string(self).expect("config serialises").as_bytes())
    }

    fn infer_config(&self, method: Method, stars_seed: u64) -> InferConfig {
        let base = InferConfig::default();
        InferConfig {
            method,
            nlambda: self.nlambda.unwrap_or(base.nlambda),
            stars: StarsOptions { subsamples: self.stars_subsamples.unwrap_or(base.stars.subsamples), seed: stars_seed, ..base.stars },
            ..base
        }
    }
}

/// Coordinates of one replicate of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub topology: Topology,
    pub p: usize,
    pub n: usize,
    pub kappa: f64,
    pub replicate: usize,
}

impl CellKey {
    fn stem(&self) -> String {
        format!("{}_p{}_n{}_k{}_r{}", self.topology, self.p, self.n, self.kappa, self.replicate)
    }
}

/// Seeds shared by every sample size of a (topology, p, kappa, replicate) instance. Data rows
/// are drawn sequentially, so each sample size sees a prefix of the same stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSeeds {
    pub graph: u64,
    pub precision: u64,
    pub marginals: u64,
    pub data: u64,
}

impl InstanceSeeds {
    pub fn derive(master: u64, topology: Topology, p: usize, kappa: f64, replicate: usize) -> Self {
        let s = |what: &str| derive_seed(master, &[&what, &topology, &p, &kappa, &replicate]);
        Self { graph: s("graph"), precision: s("precision"), marginals: s("marginals"), data: s("data") }
    }
}

fn stars_seed(master: u64, key: &CellKey, method: Method) -> u64 {
    derive_seed(master, &[&"stars", &key.topology, &key.p, &key.n, &key.kappa, &key.replicate, &method])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub key: CellKey,
    pub method: Method,
    pub stars_seed: u64,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    /// Mean and standard error; the error is 0 for a single value and NaN for none.
    pub fn of(values: &[f64]) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let se = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
        } else if values.is_empty() {
            f64::NAN
        } else {
            0.0
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub topology: Topology,
    pub p: usize,
    pub n: usize,
    pub kappa: f64,
    pub method: Method,
    pub completed: usize,
    pub failed: usize,
    pub aupr: MeanSe,
    pub hamming: MeanSe,
    pub kl_degree: MeanSe,
    pub kl_betweenness: MeanSe,
    pub kl_geodesic: MeanSe,
    pub kl_component_size: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub topology: Topology,
    pub p: usize,
    pub kappa: f64,
    pub replicate: usize,
    pub seeds: InstanceSeeds,
    pub kappa_achieved: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub instances: Vec<InstanceRecord>,
    pub cells: Vec<CellRecord>,
    pub summary: Vec<SummaryRow>,
}

impl BenchmarkResult {
    pub fn row(&self, topology: Topology, p: usize, n: usize, kappa: f64, method: Method) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.topology == topology && r.p == p && r.n == n && r.kappa == kappa && r.method == method)
    }
}

/// Ground truth and marginals of one replicate, shared by all its sample sizes.
pub struct Instance {
    pub model: GraphModel,
    pub marginals: Vec<MarginalModel>,
}

pub fn build_instance(cfg: &BenchmarkConfig, topology: Topology, p: usize, kappa: f64, seeds: &InstanceSeeds) -> Result<Instance> {
    let e = cfg.edges.unwrap_or(p);
    let adjacency = generate(topology, p, e, default_clusters(p), seeds.graph)?;
    let model = make_precision(&adjacency, cfg.theta_min, cfg.theta_max, kappa, seeds.precision)?;
    let marginals = match &cfg.marginal_source {
        MarginalSource::Synthetic(ranges) => synthetic_marginals(ranges, p, seeds.marginals)?,
        MarginalSource::File(path) => {
            let file: MarginalFile = io::read_json(path)?;
            let models = file.models();
            if models.len() < p {
                return Err(Error::DimensionMismatch(format!("{} fitted marginals for p = {p}", models.len())));
            }
            models[..p].to_vec()
        }
    };
    Ok(Instance { model, marginals })
}

fn run_instance(
    cfg: &BenchmarkConfig,
    topology: Topology,
    p: usize,
    kappa: f64,
    replicate: usize,
) -> (InstanceRecord, Vec<CellRecord>) {
    let seeds = InstanceSeeds::derive(cfg.seed, topology, p, kappa, replicate);
    let mut record = InstanceRecord { topology, p, kappa, replicate, seeds, kappa_achieved: None, error: None };
    let mut cells = Vec::new();
    let key = |n: usize| CellKey { topology, p, n, kappa, replicate };
    let fail_all = |cells: &mut Vec<CellRecord>, msg: &str| {
        for &n in &cfg.n_values {
            for &method in &cfg.methods {
                let k = key(n);
                cells.push(CellRecord { key: k, method, stars_seed: stars_seed(cfg.seed, &k, method), report: None, error: Some(msg.to_string()) });
            }
        }
    };
    let instance = match build_instance(cfg, topology, p, kappa, &seeds) {
        Ok(i) => i,
        Err(e) => {
            record.error = Some(e.to_string());
            fail_all(&mut cells, &e.to_string());
            return (record, cells);
        }
    };
    record.kappa_achieved = Some(instance.model.kappa);
    let n_max = cfg.n_values.iter().copied().max().unwrap_or(0);
    let counts = sample_mvn(&instance.model.correlation, n_max, seeds.data).and_then(|z| counts_from_latent(&z, &instance.marginals));
    let counts = match counts {
        Ok(c) => c,
        Err(e) => {
            record.error = Some(e.to_string());
            fail_all(&mut cells, &e.to_string());
            return (record, cells);
        }
    };
    let truth = &instance.model.adjacency;
    for &n in &cfg.n_values {
        let k = key(n);
        let data = CountMatrix::from_values(counts.rows(0, n).into_owned());
        for &method in &cfg.methods {
            let s = stars_seed(cfg.seed, &k, method);
            let outcome = data.as_ref().map_err(|e| Error::Degenerate(e.to_string())).and_then(|d| {
                let out = infer(d, &cfg.infer_config(method, s))?;
                evaluate(&out.ranked, Some(&out.network.adjacency()), truth, None, None)
            });
            let (report, error) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            cells.push(CellRecord { key: k, method, stars_seed: s, report, error });
        }
    }
    (record, cells)
}

/// Runs every cell of the grid. Instances run in parallel; results are collected in grid
/// order, so the output does not depend on scheduling.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &topology in &cfg.topologies {
        for &p in &cfg.p_values {
            for &kappa in &cfg.kappas {
                for replicate in 0..cfg.replicates {
                    jobs.push((topology, p, kappa, replicate));
                }
            }
        }
    }
    let outcomes: Vec<(InstanceRecord, Vec<CellRecord>)> =
        jobs.par_iter().map(|&(t, p, k, r)| run_instance(cfg, t, p, k, r)).collect();
    let mut instances = Vec::with_capacity(outcomes.len());
    let mut cells = Vec::new();
    for (rec, c) in outcomes {
        instances.push(rec);
        cells.extend(c);
    }
    let summary = summarize(cfg, &cells);
    Ok(BenchmarkResult { instances, cells, summary })
}

fn summarize(cfg: &BenchmarkConfig, cells: &[CellRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &topology in &cfg.topologies {
        for &p in &cfg.p_values {
            for &n in &cfg.n_values {
                for &kappa in &cfg.kappas {
                    for &method in &cfg.methods {
                        let mut group: Vec<&CellRecord> = cells
                            .iter()
                            .filter(|c| c.key.topology == topology && c.key.p == p && c.key.n == n && c.key.kappa == kappa && c.method == method)
                            .collect();
                        group.sort_by_key(|c| c.key.replicate);
                        let reports: Vec<&MetricsReport> = group.iter().filter_map(|c| c.report.as_ref()).collect();
                        let stat = |f: &dyn Fn(&MetricsReport) -> f64| MeanSe::of(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
                        rows.push(SummaryRow {
                            topology,
                            p,
                            n,
                            kappa,
                            method,
                            completed: reports.len(),
                            failed: group.len() - reports.len(),
                            aupr: stat(&|r| r.aupr),
                            hamming: stat(&|r| r.hamming as f64),
                            kl_degree: stat(&|r| r.kl.degree),
                            kl_betweenness: stat(&|r| r.kl.betweenness),
                            kl_geodesic: stat(&|r| r.kl.geodesic),
                            kl_component_size: stat(&|r| r.kl.component_size),
                        });
                    }
                }
            }
        }
    }
    rows
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let metrics = ["aupr", "hamming", "kl_degree", "kl_betweenness", "kl_geodesic", "kl_component_size"];
    let mut out = String::from("topology\tp\tn\tkappa\tmethod\tcompleted\tfailed");
    for m in metrics {
        write!(out, "\t{m}_mean\t{m}_se").unwrap();
    }
    out.push('\n');
    for r in rows {
        write!(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}", r.topology, r.p, r.n, r.kappa, r.method, r.completed, r.failed).unwrap();
        for v in [r.aupr, r.hamming, r.kl_degree, r.kl_betweenness, r.kl_geodesic, r.kl_component_size] {
            write!(out, "\t{}\t{}", v.mean, v.se).unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub config: BenchmarkConfig,
    pub software_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub instances: Vec<InstanceRecord>,
    pub cell_seeds: Vec<(String, Method, u64)>,
    pub outputs: Vec<PathBuf>,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Runs the grid and writes `summary.tsv`, one report per cell under `reports/`, and
/// `manifest.json` into `dir`. Only the manifest carries timestamps.
pub fn run_benchmark_to_dir(cfg: &BenchmarkConfig, dir: &Path) -> Result<(BenchmarkResult, RunManifest)> {
    let started_unix = unix_now();
    let result = run_benchmark(cfg)?;
    let mut outputs = vec![PathBuf::from("summary.tsv")];
    io::write_text(&dir.join("summary.tsv"), &format_summary(&result.summary))?;
    for c in &result.cells {
        let rel = PathBuf::from("reports").join(format!("{}_{}.json", c.key.stem(), c.method));
        io::write_json(&dir.join(&rel), c)?;
        outputs.push(rel);
    }
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        finished_unix: unix_now(),
        instances: result.instances.clone(),
        cell_seeds: result.cells.iter().map(|c| (c.key.stem(), c.method, c.stars_seed)).collect(),
        outputs,
    };
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok((result, manifest))
}

pub const HUB_SAMPLES: usize = 500;
/// Node index of the hub in the four-node example.
pub const HUB: usize = 2;
pub const HUB_THRESHOLDS: [f64; 2] = [0.35, 0.5];
/// Family-wise level of the partial-correlation tests.
pub const HUB_ALPHA: f64 = 0.01;

/// Latent correlations between the hub and nodes 0, 1 and 3. Leaves are conditionally
/// independent given the hub, so leaf pairs correlate as the product of their hub links.
pub const HUB_LINKS: [f64; 3] = [0.43, 0.72, 0.72];

pub fn hub_correlation() -> DMatrix<f64> {
    let leaves = [0, 1, 3];
    let mut link = [0.0; 4];
    for (&l, &r) in leaves.iter().zip(&HUB_LINKS) {
        link[l] = r;
    }
    DMatrix::from_fn(4, 4, |i, j| match (i, j) {
        _ if i == j => 1.0,
        (HUB, k) | (k, HUB) => link[k],
        _ => link[i] * link[j],
    })
}

pub fn hub_marginals() -> Vec<MarginalModel> {
    // Negative binomials with size 10 and means between 60 and 150.
    [80.0, 150.0, 100.0, 60.0].iter().map(|&m| MarginalModel::NegBinom { r: 10.0, p: m / (m + 10.0) }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOutcome {
    pub threshold: f64,
    pub edges: Vec<(usize, usize)>,
    pub spurious: Vec<(usize, usize)>,
    pub missed: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubReport {
    pub seed: u64,
    pub n: usize,
    pub truth: Vec<(usize, usize)>,
    pub count_correlation: DMatrix<f64>,
    pub partial_correlation: DMatrix<f64>,
    pub inverse_covariance_edges: Vec<(usize, usize)>,
    pub inverse_covariance_exact: bool,
    /// Neighbourhood selection with StARS on the same data, for comparison.
    pub stars_edges: Vec<(usize, usize)>,
    pub pearson: Vec<ThresholdOutcome>,
}

fn outcome(threshold: f64, found: &Adjacency, truth: &Adjacency) -> ThresholdOutcome {
    ThresholdOutcome {
        threshold,
        edges: found.edges().collect(),
        spurious: found.edges().filter(|&(i, j)| !truth.contains(i, j)).collect(),
        missed: truth.edges().filter(|&(i, j)| !found.contains(i, j)).collect(),
    }
}

/// Support of the inverse covariance: pairs whose partial correlation passes a two-sided
/// Fisher z test at family-wise level `alpha` (Bonferroni over all pairs).
pub fn partial_correlation_support(x: &DMatrix<f64>, alpha: f64) -> Result<(DMatrix<f64>, Adjacency)> {
    let (n, p) = x.shape();
    if n < p + 2 {
        return Err(Error::InvalidParameter(format!("partial correlations need n >= p + 2, got n = {n}, p = {p}")));
    }
    let cov = crate::compositions::covariance_of(x, crate::compositions::CovarianceKind::Covariance)?.matrix;
    let theta = crate::linalg::inverse_pd(&cov)?;
    let partial = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { -theta[(i, j)] / (theta[(i, i)] * theta[(j, j)]).sqrt() });
    let level = alpha / (p * (p - 1) / 2) as f64;
    let scale = ((n - p - 1) as f64).sqrt();
    let mut support = Adjacency::empty(p);
    for i in 0..p {
        for j in (i + 1)..p {
            let z = partial[(i, j)].clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh() * scale;
            if 2.0 * (1.0 - crate::marginals::std_normal_cdf(z.abs())) < level {
                support.insert(i, j)?;
            }
        }
    }
    Ok((partial, support))
}

/// Four nodes, one hub, negative-binomial counts. Compares thresholded correlation of the
/// counts with the inverse-covariance support of `log(1 + counts)`.
pub fn toy_hub_demo(seed: u64) -> Result<HubReport> {
    let truth = Adjacency::from_edges(4, [(0, HUB), (1, HUB), (HUB, 3)])?;
    let latent = sample_mvn(&hub_correlation(), HUB_SAMPLES, derive_seed(seed, &[&"hub-data"]))?;
    let counts = counts_from_latent(&latent, &hub_marginals())?.map(|c| c as f64);
    let logged = counts.map(f64::ln_1p);
    let (partial_correlation, found) = partial_correlation_support(&logged, HUB_ALPHA)?;
    let cfg = InferConfig { stars: StarsOptions { seed: derive_seed(seed, &[&"hub-stars"]), ..Default::default() }, ..Default::default() };
    let stars = infer_matrix(&logged, &cfg)?.network.adjacency();
    let mut pearson = Vec::new();
    let mut count_correlation = DMatrix::zeros(4, 4);
    for threshold in HUB_THRESHOLDS {
        let r = crate::inference::pearson_network(&counts, threshold)?;
        pearson.push(outcome(threshold, &r.network.adjacency(), &truth));
        count_correlation = r.correlation;
    }
    Ok(HubReport {
        seed,
        n: HUB_SAMPLES,
        truth: truth.edges().collect(),
        count_correlation,
        partial_correlation,
        inverse_covariance_exact: found == truth,
        inverse_covariance_edges: found.edges().collect(),
        stars_edges: stars.edges().collect(),
        pearson,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproducibilityReport {
    pub method: Method,
    pub n1: usize,
    pub n2: usize,
    pub distances: Vec<usize>,
    pub mean: f64,
    /// Empirical 2.5% and 97.5% quantiles; absent for a single repeat.
    pub interval: Option<(f64, f64)>,
}

/// Hamming distance between the networks inferred from two count tables under one config.
pub fn split_distance(a: &CountMatrix, b: &CountMatrix, cfg: &InferConfig) -> Result<usize> {
    let na = infer(a, cfg)?.network.adjacency();
    let nb = infer(b, cfg)?.network.adjacency();
    hamming(&na, &nb)
}

/// Repeatedly splits the samples into disjoint groups of `n1` and `n2`, infers a network from
/// each and records their Hamming distance.
pub fn reproducibility_experiment(
    data: &CountMatrix,
    n1: usize,
    n2: usize,
    repeats: usize,
    cfg: &InferConfig,
    seed: u64,
) -> Result<ReproducibilityReport> {
    let n = data.n_samples();
    if n1 == 0 || n2 == 0 || n1 + n2 > n {
        return Err(Error::Infeasible(format!("cannot split {n} samples into disjoint groups of {n1} and {n2}")));
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let distances = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(derive_seed(seed, &[&"split", &r]));
            let perm = rand::seq::index::sample(&mut rng, n, n1 + n2).into_vec();
            let mut first = perm[..n1].to_vec();
            let mut second = perm[n1..].to_vec();
            first.sort_unstable();
            second.sort_unstable();
            let cfg = InferConfig { stars: StarsOptions { seed: derive_seed(seed, &[&"stars", &r]), ..cfg.stars }, ..cfg.clone() };
            split_distance(&data.select_samples(&first)?, &data.select_samples(&second)?, &cfg)
        })
        .collect::<Result<Vec<usize>>>()?;
    let values: Vec<f64> = distances.iter().map(|&d| d as f64).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let interval = (repeats > 1).then(|| (quantile_linear(&values, 0.025), quantile_linear(&values, 0.975)));
    Ok(ReproducibilityReport { method: cfg.method, n1, n2, distances, mean, interval })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(methods: Vec<Method>) -> BenchmarkConfig {
        BenchmarkConfig {
            topologies: vec![Topology::Band],
            p_values: vec![10],
            n_values: vec![40],
            kappas: vec![10.0],
            replicates: 1,
            methods,
            seed: 5,
            stars_subsamples: Some(5),
            nlambda: Some(8),
            ..Default::default()
        }
    }

    #[test]
    fn one_cell_one_report() {
        let r = run_benchmark(&tiny(vec![Method::Mb])).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert!(r.cells[0].report.is_some());
        assert_eq!(r.summary.len(), 1);
        assert_eq!(r.summary[0].completed, 1);
        assert_eq!(r.summary[0].aupr.se, 0.0);
    }

    #[test]
    fn failures_are_recorded_per_cell() {
        let mut cfg = tiny(vec![Method::Pearson]);
        cfg.p_values.push(4);
        // Four nodes cannot hold 12 edges; ten can.
        cfg.edges = Some(12);
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.row(Topology::Band, 10, 40, 10.0, Method::Pearson).unwrap().completed, 1);
        let bad = r.row(Topology::Band, 4, 40, 10.0, Method::Pearson).unwrap();
        assert_eq!((bad.completed, bad.failed), (0, 1));
        assert!(bad.aupr.mean.is_nan());
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = tiny(vec![]);
        assert!(cfg.validate().is_err());
        cfg.methods = vec![Method::Mb];
        cfg.replicates = 0;
        assert!(cfg.validate().is_err());
        cfg.replicates = 1;
        cfg.kappas = vec![1.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: BenchmarkConfig = serde_json::from_str(
            r#"{"topologies":["band"],"p_values":[10],"n_values":[20],"kappas":[10],"replicates":1,"methods":["mb"],"seed":1}"#,
        )
        .unwrap();
        assert_eq!(cfg.theta_min, 2.0);
        assert_eq!(cfg.marginal_source, MarginalSource::default());
        let mut v = serde_json::to_value(&cfg).unwrap();
        v["marginal_source"] = serde_json::json!({"file": "m.json"});
        let with_file: BenchmarkConfig = serde_json::from_value(v).unwrap();
        assert_eq!(with_file.marginal_source, MarginalSource::File("m.json".into()));
    }

    #[test]
    fn synthetic_marginals_respect_ranges() {
        let r = SyntheticRanges::default();
        for m in synthetic_marginals(&r, 200, 3).unwrap() {
            let MarginalModel::ZiNegBinom { phi, r: size, p } = m else { panic!("wrong family") };
            let mean = size * p / (1.0 - p);
            assert!((0.2..=0.7).contains(&phi));
            assert!((0.3..=3.0).contains(&size));
            assert!((1.0 - 1e-9..=200.0 + 1e-9).contains(&mean));
            assert!(m.ln_pmf(0).exp() <= 0.4);
        }
        assert!(synthetic_marginals(&SyntheticRanges { phi: (0.5, 1.0), ..r }, 3, 0).is_err());
    }

    #[test]
    fn hub_correlation_has_star_precision() {
        let theta = crate::linalg::inverse_pd(&hub_correlation()).unwrap();
        for (i, j) in [(0, 1), (0, 3), (1, 3)] {
            assert!(theta[(i, j)].abs() < 1e-12);
        }
        for l in [0, 1, 3] {
            assert!(theta[(l, HUB)].abs() > 0.1);
        }
    }

    #[test]
    fn repeats_of_one_have_no_interval() {
        let cfg = tiny(vec![Method::Pearson]);
        let seeds = InstanceSeeds::derive(0, Topology::Band, 10, 10.0, 0);
        let inst = build_instance(&cfg, Topology::Band, 10, 10.0, &seeds).unwrap();
        let z = sample_mvn(&inst.model.correlation, 60, 1).unwrap();
        let data = CountMatrix::from_values(counts_from_latent(&z, &inst.marginals).unwrap()).unwrap();
        let icfg = InferConfig { method: Method::Pearson, ..Default::default() };
        let rep = reproducibility_experiment(&data, 30, 30, 1, &icfg, 0).unwrap();
        assert_eq!(rep.distances.len(), 1);
        assert!(rep.interval.is_none());
        assert!(reproducibility_experiment(&data, 40, 30, 1, &icfg, 0).is_err());
        assert_eq!(split_distance(&data, &data, &icfg).unwrap(), 0);
    }
}
