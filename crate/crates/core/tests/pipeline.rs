use std::fs;

use micronet::benchmark::{
    build_instance, reproducibility_experiment, run_benchmark, run_benchmark_to_dir, toy_hub_demo, BenchmarkConfig, InstanceSeeds,
};
use micronet::compositions::CountMatrix;
use micronet::evaluation::evaluate;
use micronet::inference::{infer, InferConfig, Method, StarsOptions};
use micronet::io;
use micronet::norta::{counts_from_latent, sample_mvn};
use micronet::topology::Topology;

fn small_grid() -> BenchmarkConfig {
    BenchmarkConfig {
        topologies: vec![Topology::Band, Topology::Cluster],
        p_values: vec![20],
        n_values: vec![40, 80],
        kappas: vec![10.0, 100.0],
        replicates: 2,
        methods: vec![Method::Mb, Method::Pearson],
        seed: 3,
        stars_subsamples: Some(6),
        nlambda: Some(10),
        ..Default::default()
    }
}

#[test]
fn reruns_write_identical_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small_grid();
    let (_, manifest) = run_benchmark_to_dir(&cfg, a.path()).unwrap();
    run_benchmark_to_dir(&cfg, b.path()).unwrap();
    assert_eq!(manifest.outputs.len(), 1 + 2 * 2 * 2 * 2 * 2);
    for rel in &manifest.outputs {
        assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{}", rel.display());
    }
    let on_disk: BenchmarkConfig = io::read_json::<serde_json::Value>(&a.path().join("manifest.json"))
        .map(|v| serde_json::from_value(v["config"].clone()).unwrap())
        .unwrap();
    assert_eq!(on_disk, cfg);
}

#[test]
fn removing_cells_leaves_others_unchanged() {
    let full = run_benchmark(&small_grid()).unwrap();
    let reduced_cfg = BenchmarkConfig { topologies: vec![Topology::Cluster], n_values: vec![40], kappas: vec![100.0], ..small_grid() };
    let reduced = run_benchmark(&reduced_cfg).unwrap();
    assert_eq!(reduced.cells.len(), 2 * 2);
    for cell in &reduced.cells {
        let twin = full.cells.iter().find(|c| c.key == cell.key && c.method == cell.method).unwrap();
        assert_eq!(twin, cell);
    }
}

#[test]
fn hub_demo_is_reproducible() {
    assert_eq!(toy_hub_demo(12).unwrap(), toy_hub_demo(12).unwrap());
}

#[test]
fn evaluation_from_files_matches_direct_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_grid();
    let seeds = InstanceSeeds::derive(9, Topology::Band, 20, 10.0, 0);
    let inst = build_instance(&cfg, Topology::Band, 20, 10.0, &seeds).unwrap();
    let graph = dir.path().join("graph.tsv");
    io::write_graph_model(&graph, &inst.model, 9, Some("band")).unwrap();
    let (model, _) = io::read_graph_model(&graph).unwrap();
    let z = sample_mvn(&model.correlation, 120, seeds.data).unwrap();
    let counts = CountMatrix::from_values(counts_from_latent(&z, &inst.marginals).unwrap()).unwrap();
    io::write_count_table(&dir.path().join("counts.tsv"), &counts).unwrap();
    let reread = micronet::compositions::load_count_table(dir.path().join("counts.tsv"), Default::default()).unwrap();
    assert_eq!(reread, counts);
    let icfg = InferConfig { stars: StarsOptions { subsamples: 8, ..Default::default() }, ..Default::default() };
    let out = infer(&reread, &icfg).unwrap();
    let direct = evaluate(&out.ranked, Some(&out.network.adjacency()), &model.adjacency, None, None).unwrap();
    let file = io::parse_inferred(&io::format_inferred(&out), 20).unwrap();
    let via_file = evaluate(&file.ranked, Some(&file.selected), &model.adjacency, None, None).unwrap();
    assert_eq!(direct.hamming, via_file.hamming);
    assert!((direct.aupr - via_file.aupr).abs() < 1e-12);
}

// StARS tolerates a mean pairwise instability of beta, so split halves disagree on
// roughly beta * p(p-1)/2 pairs at any n, while thresholded correlations settle as n grows.
// Observed here: MB about 165, Pearson about 30.
#[test]
#[ignore = "ordering does not hold on NorTA synthetic data; see README"]
fn neighbourhood_selection_is_more_reproducible_than_thresholding() {
    let cfg = BenchmarkConfig { p_values: vec![68], ..small_grid() };
    let seeds = InstanceSeeds::derive(21, Topology::Cluster, 68, 100.0, 0);
    let inst = build_instance(&cfg, Topology::Cluster, 68, 100.0, &seeds).unwrap();
    let z = sample_mvn(&inst.model.correlation, 600, seeds.data).unwrap();
    let data = CountMatrix::from_values(counts_from_latent(&z, &inst.marginals).unwrap()).unwrap();
    let stars = StarsOptions { subsamples: 20, ..Default::default() };
    let mb = InferConfig { method: Method::Mb, stars, ..Default::default() };
    let pearson = InferConfig { method: Method::Pearson, ..Default::default() };
    let d_mb = reproducibility_experiment(&data, 300, 300, 3, &mb, 4).unwrap();
    let d_pearson = reproducibility_experiment(&data, 300, 300, 3, &pearson, 4).unwrap();
    assert!(d_mb.mean < d_pearson.mean, "MB {:?} vs Pearson {:?}", d_mb.distances, d_pearson.distances);
    assert!(d_mb.interval.is_some());
}
