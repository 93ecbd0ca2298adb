//! Acceptance suite: one test per release criterion, each printing a single
//! `criterion NN: PASS/FAIL` line. Dataset parameters here are the canonical
//! desk-scale configurations; expected margins were calibrated on these
//! exact seeds.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gknn_core::analysis::{
    global_clustering, local_clustering, scc_decompose, tarjan_scc, verify_theorem1,
    NeighborhoodSubgraph,
};
use gknn_core::dataset::{brute_force_knn, generate_synthetic, SyntheticKind};
use gknn_core::graph::{build_graph, EdgeStrategy, KnnGraph};
use gknn_core::harness::{
    run_cc_vs_k, run_cc_vs_recall, run_scc_tables, run_two_phase, DatasetSpec, ExperimentConfig,
    TwoPhaseReport,
};
use gknn_core::search::{batch_search, EntryRule, SearchParams};
use gknn_core::VertexId;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id:02} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id:02} ({name}) failed: {detail}");
}

fn within(start: Instant, budget: Duration) -> (bool, String) {
    let elapsed = start.elapsed();
    (
        elapsed <= budget,
        format!("{:.1}s of {:.0}s budget", elapsed.as_secs_f64(), budget.as_secs_f64()),
    )
}

fn uniform_spec(name: &str) -> DatasetSpec {
    DatasetSpec::Synthetic {
        name: name.into(),
        kind: SyntheticKind::Uniform,
        n: 20_000,
        dim: 32,
        seed: 101,
    }
}

fn cluster_spec(name: &str, clusters: usize, sigma: f64, seed: u64) -> DatasetSpec {
    DatasetSpec::Synthetic {
        name: name.into(),
        kind: SyntheticKind::GaussianClusters { clusters, sigma },
        n: 20_000,
        dim: 32,
        seed,
    }
}

fn desk_config(datasets: Vec<DatasetSpec>, out_dir: PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        datasets,
        k_list: vec![20],
        strategies: vec![EdgeStrategy::UndirectedKnn],
        mod_cap: Some(70),
        num_queries: 100,
        k: 20,
        l: 20,
        seed: 7,
        out_dir,
    }
}

// --------------------------------------------------------------------------
// 1. SCC decomposition vs. transitive-closure oracle on random digraphs.

/// Mutual-reachability partition via u64-bitset closure (n <= 64).
fn closure_partition(adjacency: &[Vec<usize>]) -> Vec<Vec<VertexId>> {
    let n = adjacency.len();
    let mut reach: Vec<u64> = (0..n).map(|v| 1u64 << v).collect();
    for (v, outs) in adjacency.iter().enumerate() {
        for &u in outs {
            reach[v] |= 1 << u;
        }
    }
    loop {
        let mut changed = false;
        for v in 0..n {
            let mut next = reach[v];
            let mut bits = reach[v];
            while bits != 0 {
                let u = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                next |= reach[u];
            }
            if next != reach[v] {
                reach[v] = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for v in 0..n {
        if seen[v] {
            continue;
        }
        let mut comp = Vec::new();
        for u in 0..n {
            if reach[v] & (1 << u) != 0 && reach[u] & (1 << v) != 0 {
                comp.push(u as VertexId);
                seen[u] = true;
            }
        }
        components.push(comp);
    }
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    components
}

#[test]
fn criterion_01_scc_matches_closure_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let probs = [0.05, 0.15, 0.4];
    let mut agreed = 0usize;
    for trial in 0..1000 {
        let n = rng.random_range(1..=64usize);
        let p = probs[trial % probs.len()];
        let adjacency: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                (0..n)
                    .filter(|&u| u != v && rng.random::<f64>() < p)
                    .collect()
            })
            .collect();
        let sub = NeighborhoodSubgraph {
            members: (0..n as VertexId).collect(),
            adjacency: adjacency.clone(),
        };
        if scc_decompose(&sub).components == closure_partition(&adjacency) {
            agreed += 1;
        }
    }
    let (in_time, timing) = within(start, Duration::from_secs(10));
    verdict(
        1,
        "scc oracle equivalence",
        agreed == 1000 && in_time,
        &format!("{agreed}/1000 digraphs agree; {timing}"),
    );
}

// --------------------------------------------------------------------------
// 2. Planted instances: every component member reachable from every entry.

#[test]
fn criterion_02_planted_components_fully_visited() {
    let start = Instant::now();
    let report = verify_theorem1(200, 123).expect("planted instances generate");
    let (in_time, timing) = within(start, Duration::from_secs(30));
    verdict(
        2,
        "guaranteed full visit on planted instances",
        report.all_passed() && report.passed == 200 && in_time,
        &format!("{}/{} instances visited completely; {timing}", report.passed, report.trials),
    );
}

// --------------------------------------------------------------------------
// 3. Full-beam search equals brute force on a strongly connected graph.

#[test]
fn criterion_03_exact_at_saturation() {
    let start = Instant::now();
    let full = generate_synthetic(SyntheticKind::Uniform, 2_100, 32, 909, "sat").unwrap();
    let (base, queries) = full.split_holdout(100).unwrap();
    let g = build_graph(&base, 20, EdgeStrategy::UndirectedKnn, None).unwrap();

    let adjacency: Vec<Vec<usize>> = g
        .adjacency()
        .iter()
        .map(|list| list.iter().map(|&u| u as usize).collect())
        .collect();
    let strongly_connected = tarjan_scc(&adjacency).len() == 1;
    assert!(strongly_connected, "setup: graph must be strongly connected");

    let params = SearchParams {
        k: 20,
        l: base.len(),
        entry: EntryRule::Random { seed: 7 },
    };
    let query_rows = queries.to_rows();
    let traces = batch_search(&g, &base, &query_rows, &params).unwrap();
    let exact = query_rows
        .iter()
        .zip(&traces)
        .filter(|(q, t)| t.result == brute_force_knn(&base, q, 20).unwrap())
        .count();
    let (in_time, timing) = within(start, Duration::from_secs(60));
    verdict(
        3,
        "exactness at saturation",
        exact == 100 && in_time,
        &format!("{exact}/100 queries exact with L=n on a strongly connected graph; {timing}"),
    );
}

// --------------------------------------------------------------------------
// 4. Clustering coefficient fixtures with exact values.

#[test]
fn criterion_04_clustering_fixtures() {
    // Hub linked to four vertices forming two linked pairs: two of the six
    // hub-neighbor pairs are themselves linked.
    let hub = KnnGraph::from_adjacency(vec![
        vec![1, 2, 3, 4],
        vec![0, 2],
        vec![0, 1],
        vec![0, 4],
        vec![0, 3],
    ])
    .unwrap();
    let hub_cc = local_clustering(&hub, 0);

    let n = 5;
    let complete = KnnGraph::from_adjacency(
        (0..n)
            .map(|v| (0..n as VertexId).filter(|&u| u != v as VertexId).collect())
            .collect(),
    )
    .unwrap();
    let complete_cc = global_clustering(&complete).global;

    let matching =
        KnnGraph::from_adjacency(vec![vec![1], vec![0], vec![3], vec![2], vec![5], vec![4]])
            .unwrap();
    let matching_cc = global_clustering(&matching).global;

    verdict(
        4,
        "clustering coefficient fixtures",
        hub_cc == 1.0 / 3.0 && complete_cc == 1.0 && matching_cc == 0.0,
        &format!("hub vertex {hub_cc} (want 1/3), complete {complete_cc}, matching {matching_cc}"),
    );
}

// --------------------------------------------------------------------------
// 5. Clustering coefficient grows with K; uniform data stays near zero
//    under lune pruning.

#[test]
fn criterion_05_cc_vs_k_trend() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut config = desk_config(
        vec![uniform_spec("uniform"), cluster_spec("blobs", 200, 0.02, 202)],
        dir.path().into(),
    );
    config.k_list = vec![10, 20, 50];
    config.strategies = vec![
        EdgeStrategy::DirectedKnn,
        EdgeStrategy::UndirectedKnn,
        EdgeStrategy::RngPruned,
        EdgeStrategy::MrngPruned,
    ];
    let report = run_cc_vs_k(&config).unwrap();

    let cc = |dataset: &str, k: usize, strategy: EdgeStrategy| {
        report
            .rows
            .iter()
            .find(|r| r.dataset == dataset && r.k_graph == k && r.strategy == strategy)
            .expect("row present")
            .clustering_coefficient
    };
    let mut monotone = true;
    for dataset in ["uniform", "blobs"] {
        for strategy in config.strategies.clone() {
            let series: Vec<f64> = config.k_list.iter().map(|&k| cc(dataset, k, strategy)).collect();
            if !(series[0] <= series[1] && series[1] <= series[2]) {
                monotone = false;
                eprintln!("non-monotone CC for {dataset}/{strategy}: {series:?}");
            }
        }
    }
    let sparse_uniform = cc("uniform", 20, EdgeStrategy::MrngPruned);
    let (in_time, timing) = within(start, Duration::from_secs(300));
    verdict(
        5,
        "cc grows with K, uniform near zero",
        monotone && sparse_uniform > 0.0 && sparse_uniform < 0.01 && in_time,
        &format!("all 8 dataset/strategy series non-decreasing over K=10/20/50; lune-pruned uniform CC(K=20) = {sparse_uniform:.5}; {timing}"),
    );
}

// --------------------------------------------------------------------------
// 6. Clustering coefficient correlates with search recall across a ladder
//    of datasets of increasing cluster tightness.

#[test]
fn criterion_06_cc_recall_correlation() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let ladder = vec![
        uniform_spec("lad-uni"),
        cluster_spec("lad-s30", 2000, 0.30, 301),
        cluster_spec("lad-s25", 2000, 0.25, 302),
        cluster_spec("lad-s20", 2000, 0.20, 303),
        cluster_spec("lad-s15", 2000, 0.15, 304),
        cluster_spec("lad-s12", 2000, 0.12, 305),
        cluster_spec("lad-s10", 2000, 0.10, 306),
        cluster_spec("lad-s08", 2000, 0.08, 307),
    ];
    let rungs = ladder.len();
    let report = run_cc_vs_recall(&desk_config(ladder, dir.path().into())).unwrap();
    let spread = report
        .cells
        .iter()
        .map(|c| c.clustering_coefficient)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (in_time, timing) = within(start, Duration::from_secs(600));
    verdict(
        6,
        "cc-recall correlation",
        rungs >= 6 && report.pearson_cc_recall >= 0.7 && in_time,
        &format!(
            "pearson = {:.4} over {rungs} datasets (CC {:.3}..{:.3}); {timing}",
            report.pearson_cc_recall, spread.0, spread.1
        ),
    );
}

// --------------------------------------------------------------------------
// 7 & 8 share one traced run over the canonical clustered dataset.

struct ClusteredRun {
    report: TwoPhaseReport,
    per_query: Vec<QueryRecord>,
    elapsed: Duration,
}

struct QueryRecord {
    entered: bool,
    fraction: f64,
    premise: bool,
}

fn read_query_records(path: &Path) -> Vec<QueryRecord> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("column {name}"))
    };
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            QueryRecord {
                entered: &r[col("entered")] == "true",
                fraction: r[col("scc_fraction_visited")].parse().unwrap(),
                premise: &r[col("premise_holds")] == "true",
            }
        })
        .collect()
}

fn clustered_run() -> &'static ClusteredRun {
    static RUN: OnceLock<ClusteredRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let config = desk_config(
            vec![cluster_spec("clustered", 2000, 0.1, 213)],
            dir.path().into(),
        );
        let report = run_two_phase(&config).unwrap();
        let per_query = read_query_records(
            &dir.path().join("two_phase_queries.clustered.K20.undirected.cap70.csv"),
        );
        ClusteredRun {
            report,
            per_query,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn criterion_07_recall_tracks_component_ratio() {
    let run = clustered_run();
    let row = &run.report.rows[0];
    let floor = row.mean_scc1_ratio - 0.05;
    let in_time = run.elapsed <= Duration::from_secs(120);
    verdict(
        7,
        "recall vs component-size ratio",
        row.mean_recall >= floor && in_time,
        &format!(
            "mean recall {:.4} >= mean ratio {:.4} - 0.05 over 100 queries; run took {:.1}s of 120s",
            row.mean_recall,
            row.mean_scc1_ratio,
            run.elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_08_two_phase_structure() {
    let start = Instant::now();
    // Clustered side: entering the component while its boundary is strictly
    // farther means the whole component gets visited; the walk there is
    // short compared to the harvest.
    let run = clustered_run();
    let covered = run
        .per_query
        .iter()
        .filter(|r| r.entered && r.premise)
        .collect::<Vec<_>>();
    let all_full = covered.iter().all(|r| r.fraction == 1.0);
    let row = &run.report.rows[0];
    let phases_ordered = row.mean_hops_phase1 < row.mean_hops_phase2;

    // Uniform side: a sparse graph over scattered neighborhoods leaves only
    // fragments, and random entries often never reach the largest one.
    let dir = tempfile::tempdir().unwrap();
    let mut config = desk_config(vec![uniform_spec("uniform")], dir.path().into());
    config.k_list = vec![5];
    config.strategies = vec![EdgeStrategy::DirectedKnn];
    let uni = run_two_phase(&config).unwrap();
    let uni_row = &uni.rows[0];
    let uni_queries = read_query_records(
        &dir.path().join("two_phase_queries.uniform.K5.directed.cap70.csv"),
    );
    let missed = uni_queries.iter().filter(|r| !r.entered).count();

    let in_time = start.elapsed() + run.elapsed <= Duration::from_secs(120);
    verdict(
        8,
        "two-phase structure",
        !covered.is_empty()
            && all_full
            && phases_ordered
            && uni_row.mean_scc1_size <= 3.0
            && missed > 0
            && in_time,
        &format!(
            "clustered: {}/{} entered+premise queries fully visit the component, hops {:.2} -> {:.2}; uniform: mean component {:.2} <= 3, {missed}/100 entries miss it",
            covered.len(),
            run.per_query.len(),
            row.mean_hops_phase1,
            row.mean_hops_phase2,
            uni_row.mean_scc1_size
        ),
    );
}

// --------------------------------------------------------------------------
// 9. Adding reverse edges can only grow the largest component.

#[test]
fn criterion_09_undirected_components_at_least_directed() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = desk_config(
        vec![uniform_spec("uniform"), cluster_spec("clustered", 2000, 0.1, 213)],
        dir.path().into(),
    );
    config.strategies = vec![EdgeStrategy::DirectedKnn, EdgeStrategy::UndirectedKnn];
    config.mod_cap = None;
    let report = run_scc_tables(&config).unwrap();

    let ratio = |dataset: &str, strategy: EdgeStrategy| {
        report
            .rows
            .iter()
            .find(|r| r.dataset == dataset && r.strategy == strategy)
            .expect("row present")
            .mean_scc_ratios[0]
    };
    let mut pass = true;
    let mut details = Vec::new();
    for dataset in ["uniform", "clustered"] {
        let d = ratio(dataset, EdgeStrategy::DirectedKnn);
        let u = ratio(dataset, EdgeStrategy::UndirectedKnn);
        pass &= u >= d;
        details.push(format!("{dataset}: undirected {u:.4} vs directed {d:.4}"));
    }
    verdict(
        9,
        "undirected >= directed component ratio",
        pass,
        &format!("paired over 100 queries; {}", details.join("; ")),
    );
}

// --------------------------------------------------------------------------
// 10. Seeded commands re-run byte-identically, end to end through the CLI.

fn run_cli(args: &[&str]) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_gknn"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "gknn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            let bytes = fs::read(&path).unwrap();
            (path, bytes)
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_seeded_reruns_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_synthetic(SyntheticKind::Uniform, 600, 8, 77, "d").unwrap();
    let data_path = dir.path().join("d.fvecs");
    gknn_core::dataset::save_fvecs(&data_path, &data).unwrap();
    let queries = generate_synthetic(SyntheticKind::Uniform, 12, 8, 78, "q").unwrap();
    let queries_path = dir.path().join("q.fvecs");
    gknn_core::dataset::save_fvecs(&queries_path, &queries).unwrap();

    let graph_path = dir.path().join("g.bin");
    let trace_path = dir.path().join("t.jsonl");
    let analyze_dir = dir.path().join("report");
    let build_args = [
        "build",
        "--input",
        data_path.to_str().unwrap(),
        "--k",
        "8",
        "--strategy",
        "undirected",
        "--cap",
        "20",
        "--out",
        graph_path.to_str().unwrap(),
    ];
    let search_args = [
        "search",
        "--graph",
        graph_path.to_str().unwrap(),
        "--data",
        data_path.to_str().unwrap(),
        "--queries",
        queries_path.to_str().unwrap(),
        "--k",
        "5",
        "--l",
        "12",
        "--entry",
        "random",
        "--seed",
        "99",
        "--out",
        trace_path.to_str().unwrap(),
    ];
    let analyze_args = [
        "analyze",
        "--table",
        "two-phase",
        "--dataset",
        "uniform:name=u,n=400,dim=8,seed=31",
        "--dataset",
        "clusters:name=c,n=400,dim=8,seed=32,clusters=40,sigma=0.02",
        "--k-list",
        "6",
        "--strategies",
        "directed,undirected",
        "--cap",
        "15",
        "--num-queries",
        "10",
        "--k",
        "5",
        "--l",
        "8",
        "--seed",
        "64",
        "--out-dir",
        analyze_dir.to_str().unwrap(),
    ];

    run_cli(&build_args);
    run_cli(&search_args);
    run_cli(&analyze_args);
    let graph_before = fs::read(&graph_path).unwrap();
    let trace_before = fs::read(&trace_path).unwrap();
    let report_before = snapshot(&analyze_dir);

    run_cli(&build_args);
    run_cli(&search_args);
    run_cli(&analyze_args);
    let identical = fs::read(&graph_path).unwrap() == graph_before
        && fs::read(&trace_path).unwrap() == trace_before
        && snapshot(&analyze_dir) == report_before;
    verdict(
        10,
        "seeded re-runs byte-identical",
        identical,
        &format!(
            "build, search, and analyze re-runs reproduced {} report files plus graph and traces exactly",
            report_before.len()
        ),
    );
}
