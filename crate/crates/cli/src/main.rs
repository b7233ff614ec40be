use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use micronet::benchmark::{self, BenchmarkConfig, SyntheticRanges};
use micronet::compositions::{load_count_table, CountMatrix, Orientation};
use micronet::evaluation::evaluate;
use micronet::inference::{infer, GlassoInput, InferConfig, Method, Rule, StarsOptions};
use micronet::io::{self, MarginalFile, MarginalRecord};
use micronet::marginals::{fit_mle, ks_critical_value, qq_r2, Family, MarginalModel};
use micronet::norta::{marginal_ks, norta_counts, SynthesisSpec};
use micronet::seed::sha256_hex;
use micronet::topology::{default_clusters, generate, make_precision, Topology};
use micronet::ErrorKind;

#[derive(Parser)]
#[command(name = "micronet", version, about = "Microbial association network inference and synthetic benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a count distribution to every taxon of a count table.
    FitMarginals(FitArgs),
    /// Generate a ground-truth graph and its precision matrix.
    GenGraph(GenGraphArgs),
    /// Synthesize counts for a graph through the normal copula.
    GenData(GenDataArgs),
    /// Infer an association network from a count table.
    Infer(InferArgs),
    /// Score an inferred edge list against a ground-truth graph.
    Eval(EvalArgs),
    /// Run the benchmark grid described by a JSON config.
    Benchmark(BenchmarkArgs),
    /// Four-node hub example: correlation thresholds against inverse-covariance support.
    ToyHub(ToyHubArgs),
    /// Split-sample reproducibility of inferred networks.
    Reproducibility(ReproArgs),
}

#[derive(Args)]
struct TableArgs {
    /// Count table (TSV or CSV) with samples as rows.
    #[arg(long)]
    input: PathBuf,
    /// The table has taxa as rows instead.
    #[arg(long)]
    taxa_as_rows: bool,
}

impl TableArgs {
    fn load(&self) -> Result<CountMatrix> {
        let orientation = if self.taxa_as_rows { Orientation::TaxaAsRows } else { Orientation::SamplesAsRows };
        Ok(load_count_table(&self.input, orientation)?)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(long, default_value = "zinb")]
    family: Family,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct GenGraphArgs {
    #[arg(long)]
    topology: Topology,
    #[arg(long)]
    p: usize,
    /// Number of edges; defaults to p.
    #[arg(long)]
    edges: Option<usize>,
    /// Number of clusters; defaults to ceil(p / 34).
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, default_value_t = 100.0)]
    kappa: f64,
    #[arg(long, default_value_t = 2.0)]
    theta_min: f64,
    #[arg(long, default_value_t = 3.0)]
    theta_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge list TSV; the JSON header is written alongside.
    #[arg(long)]
    output: PathBuf,
    /// Also write the dense correlation matrix here.
    #[arg(long)]
    correlation: Option<PathBuf>,
}

#[derive(Args)]
struct GenDataArgs {
    /// Edge list written by gen-graph.
    #[arg(long)]
    graph: PathBuf,
    /// Fitted marginals (fit-marginals output); synthetic zero-inflated negative binomials
    /// are drawn when omitted.
    #[arg(long)]
    marginals: Option<PathBuf>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Count table TSV; provenance goes to `<stem>.provenance.json` alongside.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct InferOptions {
    #[arg(long, default_value = "mb")]
    method: Method,
    #[arg(long, default_value = "union")]
    rule: Rule,
    #[arg(long, default_value_t = 30)]
    nlambda: usize,
    #[arg(long, default_value_t = 0.01)]
    lambda_min_ratio: f64,
    #[arg(long, default_value_t = 50)]
    stars_subsamples: usize,
    #[arg(long, default_value_t = 0.05)]
    stars_beta: f64,
    #[arg(long, default_value_t = 0.8)]
    subsample_fraction: f64,
    /// correlation or covariance.
    #[arg(long, default_value = "correlation", value_parser = parse_glasso_input)]
    glasso_input: GlassoInput,
    #[arg(long)]
    no_diagonal_penalty: bool,
    #[arg(long, default_value_t = 0.35)]
    pearson_threshold: f64,
    #[arg(long, default_value_t = 1)]
    pseudocount: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_glasso_input(s: &str) -> Result<GlassoInput, String> {
    match s.to_ascii_lowercase().as_str() {
        "correlation" | "cor" => Ok(GlassoInput::Correlation),
        "covariance" | "cov" => Ok(GlassoInput::Covariance),
        _ => Err(format!("unknown glasso input {s:?}")),
    }
}

impl InferOptions {
    fn config(&self) -> InferConfig {
        InferConfig {
            method: self.method,
            rule: self.rule,
            nlambda: self.nlambda,
            lambda_min_ratio: self.lambda_min_ratio,
            stars: StarsOptions {
                subsamples: self.stars_subsamples,
                fraction: self.subsample_fraction,
                beta: self.stars_beta,
                seed: self.seed,
            },
            glasso_input: self.glasso_input,
            penalize_diagonal: !self.no_diagonal_penalty,
            pearson_threshold: self.pearson_threshold,
            pseudocount: self.pseudocount,
        }
    }
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    table: TableArgs,
    #[command(flatten)]
    options: InferOptions,
    /// Edge list TSV; the run manifest goes to `<stem>.manifest.json` alongside.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Edge list written by infer.
    #[arg(long)]
    inferred: PathBuf,
    /// Ground-truth edge list written by gen-graph.
    #[arg(long)]
    truth: PathBuf,
    /// Use the top k ranked pairs as the predicted network instead of the selected one.
    #[arg(long)]
    top_k: Option<usize>,
    /// One node label per line, for assortativity.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// MetricsReport JSON; histograms go to `<stem>.histograms.tsv` alongside.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run directory; the manifest is written at its root.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ToyHubArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReproArgs {
    #[command(flatten)]
    table: TableArgs,
    #[command(flatten)]
    options: InferOptions,
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<micronet::Error>()).map(micronet::Error::kind) {
        Some(ErrorKind::Usage) | None => 1,
        Some(ErrorKind::Data) => 2,
        Some(ErrorKind::Numerical) => 3,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::FitMarginals(a) => fit_marginals(a),
        Command::GenGraph(a) => gen_graph(a),
        Command::GenData(a) => gen_data(a),
        Command::Infer(a) => run_infer(a),
        Command::Eval(a) => run_eval(a),
        Command::Benchmark(a) => run_benchmark(a),
        Command::ToyHub(a) => toy_hub(a),
        Command::Reproducibility(a) => reproducibility(a),
    }
}

fn fit_marginals(a: FitArgs) -> Result<()> {
    let counts = a.table.load()?;
    let mut marginals = Vec::with_capacity(counts.n_taxa());
    for (j, taxon) in counts.taxon_ids().iter().enumerate() {
        let column = counts.column(j);
        let fit = fit_mle(&column, a.family).with_context(|| format!("fitting taxon {taxon}"))?;
        let qq = qq_r2(&column, &fit.model).ok();
        marginals.push(MarginalRecord { taxon: taxon.clone(), fit, qq_r2: qq });
    }
    let unconverged = marginals.iter().filter(|m| !m.fit.converged).count();
    io::write_json(&a.output, &MarginalFile { marginals })?;
    println!("fitted {} taxa ({} not converged) -> {}", counts.n_taxa(), unconverged, a.output.display());
    Ok(())
}

fn gen_graph(a: GenGraphArgs) -> Result<()> {
    let e = a.edges.unwrap_or(a.p);
    let adjacency = generate(a.topology, a.p, e, a.clusters.unwrap_or_else(|| default_clusters(a.p)), a.seed)?;
    let model = make_precision(&adjacency, a.theta_min, a.theta_max, a.kappa, a.seed)?;
    let header = io::write_graph_model(&a.output, &model, a.seed, Some(a.topology.name()))?;
    if let Some(path) = &a.correlation {
        io::write_correlation(path, &model)?;
    }
    println!("{} graph: p = {}, e = {}, kappa = {:.4} -> {}", a.topology, header.p, header.e, header.kappa_achieved, a.output.display());
    Ok(())
}

#[derive(Serialize)]
struct DataProvenance {
    spec_hash: String,
    seed: u64,
    n: usize,
    p: usize,
    graph: PathBuf,
    marginals: Option<PathBuf>,
    /// `(node, taxon)`: fitted marginals are assigned to nodes in column order.
    assignment: Vec<(usize, String)>,
    ks: Vec<f64>,
    ks_critical_005: f64,
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let (model, _) = io::read_graph_model(&a.graph)?;
    let p = model.adjacency.p();
    let (marginals, taxa): (Vec<MarginalModel>, Vec<String>) = match &a.marginals {
        Some(path) => {
            let file: MarginalFile = io::read_json(path)?;
            if file.marginals.len() < p {
                return Err(micronet::Error::DimensionMismatch(format!("{} marginals for a {p}-node graph", file.marginals.len())).into());
            }
            file.marginals[..p].iter().map(|m| (m.fit.model, m.taxon.clone())).unzip()
        }
        None => {
            let models = benchmark::synthetic_marginals(&SyntheticRanges::default(), p, micronet::seed::derive_seed(a.seed, &[&"marginals"]))?;
            let names = (0..p).map(|i| format!("synthetic_{i}")).collect();
            (models, names)
        }
    };
    let spec = SynthesisSpec { correlation: model.correlation.clone(), marginals, n: a.n, seed: a.seed };
    let counts = norta_counts(&spec)?;
    let ks = marginal_ks(&spec, &counts)?;
    io::write_count_table(&a.output, &counts)?;
    let provenance = DataProvenance {
        spec_hash: sha256_hex(serde_json::to_string(&spec)?.as_bytes()),
        seed: a.seed,
        n: a.n,
        p,
        graph: a.graph.clone(),
        marginals: a.marginals.clone(),
        assignment: taxa.into_iter().enumerate().collect(),
        ks,
        ks_critical_005: ks_critical_value(a.n, 0.05),
    };
    io::write_json(&sidecar(&a.output, "provenance.json"), &provenance)?;
    println!("{} samples x {} taxa -> {}", a.n, p, a.output.display());
    Ok(())
}

#[derive(Serialize)]
struct InferManifest<'a> {
    input: &'a Path,
    config: &'a InferConfig,
    n_samples: usize,
    taxa: &'a [String],
    n_edges: usize,
    lambda_path: Option<&'a [f64]>,
    lambda_evaluated: Option<&'a [f64]>,
    instability: Option<&'a [f64]>,
    monotonized: Option<&'a [f64]>,
    selected: Option<usize>,
    lambda_selected: Option<f64>,
    warning: Option<String>,
}

/// `dir/run.tsv` + `manifest.json` -> `dir/run.manifest.json`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn run_infer(a: InferArgs) -> Result<()> {
    let counts = a.table.load()?;
    let cfg = a.options.config();
    let out = infer(&counts, &cfg)?;
    io::write_text(&a.output, &io::format_inferred(&out))?;
    let sr = out.stability.as_ref();
    let manifest = InferManifest {
        input: &a.table.input,
        config: &cfg,
        n_samples: counts.n_samples(),
        taxa: counts.taxon_ids(),
        n_edges: out.network.edges.len(),
        lambda_path: out.path.as_ref().map(|p| p.values.as_slice()),
        lambda_evaluated: sr.map(|s| s.lambdas.as_slice()),
        instability: sr.map(|s| s.instability.as_slice()),
        monotonized: sr.map(|s| s.monotonized.as_slice()),
        selected: sr.map(|s| s.selected),
        lambda_selected: sr.map(|s| s.lambda_selected),
        warning: sr.and_then(|s| s.warning.as_ref()).map(|w| format!("{w:?}")),
    };
    io::write_json(&sidecar(&a.output, "manifest.json"), &manifest)?;
    if let Some(w) = &manifest.warning {
        eprintln!("warning: {w}");
    }
    println!("{}: {} edges among {} taxa -> {}", cfg.method, manifest.n_edges, counts.n_taxa(), a.output.display());
    Ok(())
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let (truth, _) = io::read_graph_model(&a.truth)?;
    let p = truth.adjacency.p();
    let inferred = io::parse_inferred(&io::read_text(&a.inferred)?, p)?;
    let labels: Option<Vec<String>> = match &a.labels {
        Some(path) => Some(io::read_text(path)?.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect()),
        None => None,
    };
    let predicted = a.top_k.is_none().then_some(&inferred.selected);
    let report = evaluate(&inferred.ranked, predicted, &truth.adjacency, a.top_k, labels.as_deref())?;
    io::write_json(&a.output, &report)?;
    io::write_text(&sidecar(&a.output, "histograms.tsv"), &io::format_histograms(&report))?;
    println!("AUPR = {:.4}, Hamming = {} -> {}", report.aupr, report.hamming, a.output.display());
    Ok(())
}

fn run_benchmark(a: BenchmarkArgs) -> Result<()> {
    let cfg: BenchmarkConfig = io::read_json(&a.config)?;
    let (result, manifest) = benchmark::run_benchmark_to_dir(&cfg, &a.out_dir)?;
    let failed: usize = result.summary.iter().map(|r| r.failed).sum();
    println!(
        "{} cells, {} failed, config {} -> {}",
        result.cells.len(),
        failed,
        &manifest.config_hash[..12],
        a.out_dir.join("summary.tsv").display()
    );
    Ok(())
}

fn toy_hub(a: ToyHubArgs) -> Result<()> {
    let report = benchmark::toy_hub_demo(a.seed)?;
    let fmt = |edges: &[(usize, usize)]| edges.iter().map(|(i, j)| format!("{}-{}", i + 1, j + 1)).collect::<Vec<_>>().join(" ");
    println!("truth:              {}", fmt(&report.truth));
    println!(
        "inverse covariance: {} ({})",
        fmt(&report.inverse_covariance_edges),
        if report.inverse_covariance_exact { "exact" } else { "not exact" }
    );
    for t in &report.pearson {
        println!("pearson >= {:.2}:     {} (spurious: {}; missed: {})", t.threshold, fmt(&t.edges), fmt(&t.spurious), fmt(&t.missed));
    }
    if let Some(path) = &a.output {
        io::write_json(path, &report)?;
    }
    Ok(())
}

fn reproducibility(a: ReproArgs) -> Result<()> {
    let counts = a.table.load()?;
    let cfg = a.options.config();
    let report = benchmark::reproducibility_experiment(&counts, a.n1, a.n2, a.repeats, &cfg, a.options.seed)?;
    match report.interval {
        Some((lo, hi)) => println!("{}: mean Hamming {:.2}, 95% interval [{lo:.1}, {hi:.1}]", cfg.method, report.mean),
        None => println!("{}: Hamming {}", cfg.method, report.mean),
    }
    if let Some(path) = &a.output {
        io::write_json(path, &report)?;
    }
    Ok(())
}
