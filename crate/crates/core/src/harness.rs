//! End-to-end experiment runners: each builds graphs, runs query batches,
//! aggregates diagnostics, and writes deterministic CSV/JSON artifacts plus
//! a manifest with a config hash.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{
    estimate_entry_probability, global_clustering, phase_split, recall, scc_decompose,
    subgraph_from_members, traversal_premise_holds, verify_theorem1, PhaseStats, SccReport,
    TraversalReport,
};
use crate::dataset::{
    all_member_knn, brute_force_knn, generate_synthetic, load_vectors, NeighborList,
    SyntheticKind, VectorDataset, VectorFormat,
};
use crate::graph::{build_graph_from_lists, EdgeStrategy, KnnGraph};
use crate::search::{batch_search, EntryRule, SearchParams, SearchTrace};
use crate::{Error, Result};

/// Where a dataset comes from. Synthetic specs draw `n + num_queries`
/// points and hold out the tail as queries, so the base graph always has
/// exactly `n` vertices; file datasets hold out their last `num_queries`
/// rows the same way.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSpec {
    File {
        name: String,
        path: PathBuf,
        format: VectorFormat,
    },
    Synthetic {
        name: String,
        kind: SyntheticKind,
        n: usize,
        dim: usize,
        seed: u64,
    },
}

impl DatasetSpec {
    pub fn name(&self) -> &str {
        match self {
            DatasetSpec::File { name, .. } | DatasetSpec::Synthetic { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    /// Graph-construction K values; runners that need a single K use the
    /// first entry.
    pub k_list: Vec<usize>,
    /// Edge strategies; runners that need a single one use the first entry.
    pub strategies: Vec<EdgeStrategy>,
    pub mod_cap: Option<usize>,
    pub num_queries: usize,
    /// Query-time result count.
    pub k: usize,
    /// Beam width, >= k.
    pub l: usize,
    pub seed: u64,
    /// Not part of the experiment identity: excluded from the config hash.
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::InvalidParam("no datasets configured".into()));
        }
        if self.k_list.is_empty() || self.k_list.iter().any(|&k| k == 0) {
            return Err(Error::InvalidParam("k_list must be non-empty, all >= 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidParam("no edge strategies configured".into()));
        }
        if self.num_queries == 0 {
            return Err(Error::InvalidParam("num_queries must be >= 1".into()));
        }
        if self.k == 0 || self.k > self.l {
            return Err(Error::InvalidBeamWidth {
                k: self.k,
                l: self.l,
                n: usize::MAX,
            });
        }
        Ok(())
    }
}

fn with_dataset(name: &str, e: Error) -> Error {
    Error::InvalidParam(format!("dataset `{name}`: {e}"))
}

fn resolve_dataset(spec: &DatasetSpec, num_queries: usize) -> Result<(VectorDataset, Vec<Vec<f32>>)> {
    let full = match spec {
        DatasetSpec::Synthetic {
            name,
            kind,
            n,
            dim,
            seed,
        } => generate_synthetic(*kind, n + num_queries, *dim, *seed, name.clone()),
        DatasetSpec::File { name, path, format } => load_vectors(path, *format, name.clone()),
    }
    .map_err(|e| with_dataset(spec.name(), e))?;
    let (base, queries) = full
        .split_holdout(num_queries)
        .map_err(|e| with_dataset(spec.name(), e))?;
    Ok((base, queries.to_rows()))
}

// ---------------------------------------------------------------------------
// Per-cell computation

fn truths_for(base: &VectorDataset, queries: &[Vec<f32>], k: usize) -> Result<Vec<NeighborList>> {
    queries
        .par_iter()
        .map(|q| brute_force_knn(base, q, k))
        .collect()
}

fn sccs_for(g: &KnnGraph, truths: &[NeighborList]) -> Result<Vec<SccReport>> {
    truths
        .iter()
        .map(|truth| {
            let members = truth.iter().map(|nb| nb.id).collect();
            Ok(scc_decompose(&subgraph_from_members(g, members)?))
        })
        .collect()
}

fn phases_for(
    traces: &[SearchTrace],
    sccs: &[SccReport],
    truths: &[NeighborList],
    n: usize,
) -> Result<Vec<PhaseStats>> {
    traces
        .iter()
        .zip(sccs)
        .zip(truths)
        .map(|((t, s), truth)| phase_split(t, s, truth, n))
        .collect()
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        return 0.0;
    }
    xs.sum::<f64>() / n as f64
}

/// Mean size and size/k ratio of the i-th largest component over queries;
/// queries with fewer than i+1 components contribute zeros.
fn mean_top_scc(sccs: &[SccReport], rank: usize) -> (f64, f64) {
    let size = mean(
        sccs.iter()
            .map(|s| s.components.get(rank).map_or(0.0, |c| c.len() as f64)),
    );
    let ratio = mean(
        sccs.iter()
            .map(|s| s.components.get(rank).map_or(0.0, |c| c.len() as f64 / s.k as f64)),
    );
    (size, ratio)
}

// ---------------------------------------------------------------------------
// Artifact plumbing

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn cell_tag(dataset: &str, k_graph: usize, strategy: EdgeStrategy, cap: Option<usize>) -> String {
    let cap = cap.map_or(String::new(), |c| format!(".cap{c}"));
    format!("{}.K{k_graph}.{strategy}{cap}", sanitize(dataset))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Hex SHA-256 of the canonical JSON serialization.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    let mut hasher = Sha256::new();
    hasher.update(&json);
    Ok(format!("{:x}", hasher.finalize()))
}

#[derive(Debug, Serialize)]
struct Manifest<'a, T: Serialize> {
    config_hash: String,
    config: &'a T,
    /// File names relative to the manifest's directory.
    artifacts: Vec<String>,
}

fn write_manifest<T: Serialize>(
    out_dir: &Path,
    config: &T,
    mut artifacts: Vec<String>,
) -> Result<PathBuf> {
    artifacts.sort();
    let manifest = Manifest {
        config_hash: config_hash(config)?,
        config,
        artifacts,
    };
    let path = out_dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

fn fmt_cap(cap: Option<usize>) -> String {
    cap.map_or_else(|| "none".into(), |c| c.to_string())
}

// ---------------------------------------------------------------------------
// Runners

#[derive(Debug, Clone, Serialize)]
pub struct CcVsKRow {
    pub dataset: String,
    pub k_graph: usize,
    pub strategy: EdgeStrategy,
    pub mod_cap: Option<usize>,
    pub clustering_coefficient: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CcVsKReport {
    pub rows: Vec<CcVsKRow>,
    pub artifacts: Vec<PathBuf>,
}

/// Global clustering coefficient per (dataset, strategy, K); one shared
/// neighbor scan per dataset covers every K.
pub fn run_cc_vs_k(config: &ExperimentConfig) -> Result<CcVsKReport> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let max_k = *config.k_list.iter().max().expect("k_list checked non-empty");

    let mut rows = Vec::new();
    for spec in &config.datasets {
        let (base, _) = resolve_dataset(spec, config.num_queries)?;
        let lists = all_member_knn(&base, max_k).map_err(|e| with_dataset(spec.name(), e))?;
        for &strategy in &config.strategies {
            for &k_graph in &config.k_list {
                let g =
                    build_graph_from_lists(&base, &lists, k_graph, strategy, config.mod_cap)
                        .map_err(|e| with_dataset(spec.name(), e))?;
                rows.push(CcVsKRow {
                    dataset: spec.name().to_string(),
                    k_graph,
                    strategy,
                    mod_cap: config.mod_cap,
                    clustering_coefficient: global_clustering(&g).global,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then(a.k_graph.cmp(&b.k_graph))
            .then(a.strategy.to_string().cmp(&b.strategy.to_string()))
    });

    let csv_path = config.out_dir.join("cc_vs_k.csv");
    write_csv(
        &csv_path,
        &["dataset", "k_graph", "strategy", "mod_cap", "clustering_coefficient"],
        &rows
            .iter()
            .map(|r| {
                vec![
                    r.dataset.clone(),
                    r.k_graph.to_string(),
                    r.strategy.to_string(),
                    fmt_cap(r.mod_cap),
                    r.clustering_coefficient.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    let manifest = write_manifest(&config.out_dir, config, vec!["cc_vs_k.csv".into()])?;
    Ok(CcVsKReport {
        rows,
        artifacts: vec![csv_path, manifest],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryRow {
    pub query: usize,
    pub entry: u32,
    pub recall: f64,
    pub hop_count: usize,
    pub hops_phase1: usize,
    pub hops_phase2: usize,
    pub entered: bool,
    pub scc1_size: usize,
    pub scc_fraction_visited: f64,
    pub extra_true_nn: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentCell {
    pub dataset: String,
    pub k_graph: usize,
    pub strategy: EdgeStrategy,
    pub mod_cap: Option<usize>,
    pub clustering_coefficient: f64,
    pub mean_recall: f64,
    pub mean_hops: f64,
    pub mean_scc_sizes: [f64; 3],
    pub mean_scc_ratios: [f64; 3],
    pub entry_probability: f64,
    pub per_query: Vec<QueryRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub cells: Vec<ExperimentCell>,
    pub pearson_cc_recall: f64,
    pub artifacts: Vec<PathBuf>,
}

fn evaluate_cell(
    config: &ExperimentConfig,
    spec: &DatasetSpec,
    base: &VectorDataset,
    queries: &[Vec<f32>],
    lists: &[NeighborList],
    k_graph: usize,
    strategy: EdgeStrategy,
) -> Result<(ExperimentCell, Vec<SearchTrace>, Vec<SccReport>, Vec<NeighborList>, KnnGraph)> {
    let g = build_graph_from_lists(base, lists, k_graph, strategy, config.mod_cap)
        .map_err(|e| with_dataset(spec.name(), e))?;
    let cc = global_clustering(&g).global;
    let truths = truths_for(base, queries, config.k)?;
    let sccs = sccs_for(&g, &truths)?;
    let params = SearchParams {
        k: config.k,
        l: config.l,
        entry: EntryRule::Random { seed: config.seed },
    };
    let traces = batch_search(&g, base, queries, &params)?;
    let phases = phases_for(&traces, &sccs, &truths, base.len())?;
    let recalls: Vec<f64> = traces
        .iter()
        .zip(&truths)
        .map(|(t, truth)| recall(&t.result, truth))
        .collect::<Result<_>>()?;

    let per_query: Vec<QueryRow> = (0..queries.len())
        .map(|i| QueryRow {
            query: i,
            entry: traces[i].entry_vertex,
            recall: recalls[i],
            hop_count: traces[i].hop_count,
            hops_phase1: phases[i].hops_phase1,
            hops_phase2: phases[i].hops_phase2,
            entered: phases[i].entered,
            scc1_size: sccs[i].max_component().len(),
            scc_fraction_visited: phases[i].scc_fraction_visited,
            extra_true_nn: phases[i].extra_true_nn,
        })
        .collect();

    let mut sizes = [0.0; 3];
    let mut ratios = [0.0; 3];
    for rank in 0..3 {
        let (s, r) = mean_top_scc(&sccs, rank);
        sizes[rank] = s;
        ratios[rank] = r;
    }
    let cell = ExperimentCell {
        dataset: spec.name().to_string(),
        k_graph,
        strategy,
        mod_cap: config.mod_cap,
        clustering_coefficient: cc,
        mean_recall: mean(recalls.iter().copied()),
        mean_hops: mean(traces.iter().map(|t| t.hop_count as f64)),
        mean_scc_sizes: sizes,
        mean_scc_ratios: ratios,
        entry_probability: estimate_entry_probability(&traces, &sccs)?,
        per_query,
    };
    Ok((cell, traces, sccs, truths, g))
}

fn query_rows_csv(out_dir: &Path, tag: &str, prefix: &str, cell: &ExperimentCell) -> Result<String> {
    let name = format!("{prefix}_queries.{tag}.csv");
    write_csv(
        &out_dir.join(&name),
        &[
            "query",
            "entry",
            "recall",
            "hop_count",
            "hops_phase1",
            "hops_phase2",
            "entered",
            "scc1_size",
            "scc_fraction_visited",
            "extra_true_nn",
        ],
        &cell
            .per_query
            .iter()
            .map(|r| {
                vec![
                    r.query.to_string(),
                    r.entry.to_string(),
                    r.recall.to_string(),
                    r.hop_count.to_string(),
                    r.hops_phase1.to_string(),
                    r.hops_phase2.to_string(),
                    r.entered.to_string(),
                    r.scc1_size.to_string(),
                    r.scc_fraction_visited.to_string(),
                    r.extra_true_nn.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    Ok(name)
}

/// Per-dataset clustering coefficient and search recall, plus their Pearson
/// correlation across datasets. Uses the first configured K and strategy.
pub fn run_cc_vs_recall(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.datasets.len() < 2 {
        return Err(Error::DegenerateCorrelation(
            "cross-dataset correlation needs at least two datasets".into(),
        ));
    }
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let k_graph = config.k_list[0];
    let strategy = config.strategies[0];

    let mut cells = Vec::new();
    let mut artifact_names: Vec<String> = Vec::new();
    for spec in &config.datasets {
        let (base, queries) = resolve_dataset(spec, config.num_queries)?;
        let lists = all_member_knn(&base, k_graph).map_err(|e| with_dataset(spec.name(), e))?;
        let (cell, ..) = evaluate_cell(config, spec, &base, &queries, &lists, k_graph, strategy)?;
        let tag = cell_tag(spec.name(), k_graph, strategy, config.mod_cap);
        artifact_names.push(query_rows_csv(&config.out_dir, &tag, "cc_vs_recall", &cell)?);
        cells.push(cell);
    }

    let ccs: Vec<f64> = cells.iter().map(|c| c.clustering_coefficient).collect();
    let recalls: Vec<f64> = cells.iter().map(|c| c.mean_recall).collect();
    let pearson_cc_recall = crate::analysis::pearson(&ccs, &recalls)?;

    let agg_rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.dataset.clone(),
                c.k_graph.to_string(),
                c.strategy.to_string(),
                fmt_cap(c.mod_cap),
                c.clustering_coefficient.to_string(),
                c.mean_recall.to_string(),
                c.mean_hops.to_string(),
                c.entry_probability.to_string(),
            ]
        })
        .collect();
    write_csv(
        &config.out_dir.join("cc_vs_recall.csv"),
        &[
            "dataset",
            "k_graph",
            "strategy",
            "mod_cap",
            "clustering_coefficient",
            "mean_recall",
            "mean_hops",
            "entry_probability",
        ],
        &agg_rows,
    )?;
    artifact_names.push("cc_vs_recall.csv".into());

    let mut report = ExperimentReport {
        cells,
        pearson_cc_recall,
        artifacts: Vec::new(),
    };
    write_json(&config.out_dir.join("cc_vs_recall.json"), &report)?;
    artifact_names.push("cc_vs_recall.json".into());

    let manifest = write_manifest(&config.out_dir, config, artifact_names.clone())?;
    report.artifacts = artifact_names
        .iter()
        .map(|n| config.out_dir.join(n))
        .chain([manifest])
        .collect();
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SccTableRow {
    pub dataset: String,
    pub k_graph: usize,
    pub strategy: EdgeStrategy,
    pub mod_cap: Option<usize>,
    pub k: usize,
    pub mean_scc_sizes: [f64; 3],
    pub mean_scc_ratios: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct SccTableReport {
    pub rows: Vec<SccTableRow>,
    pub artifacts: Vec<PathBuf>,
}

/// Mean top-3 component sizes and ratios of query neighborhoods, per
/// dataset and strategy (no searching involved). Uses the first configured K.
pub fn run_scc_tables(config: &ExperimentConfig) -> Result<SccTableReport> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let k_graph = config.k_list[0];

    let mut rows = Vec::new();
    let mut artifact_names: Vec<String> = Vec::new();
    for spec in &config.datasets {
        let (base, queries) = resolve_dataset(spec, config.num_queries)?;
        let lists = all_member_knn(&base, k_graph).map_err(|e| with_dataset(spec.name(), e))?;
        let truths = truths_for(&base, &queries, config.k)?;
        for &strategy in &config.strategies {
            let g = build_graph_from_lists(&base, &lists, k_graph, strategy, config.mod_cap)
                .map_err(|e| with_dataset(spec.name(), e))?;
            let sccs = sccs_for(&g, &truths)?;
            let mut sizes = [0.0; 3];
            let mut ratios = [0.0; 3];
            for rank in 0..3 {
                let (s, r) = mean_top_scc(&sccs, rank);
                sizes[rank] = s;
                ratios[rank] = r;
            }

            let tag = cell_tag(spec.name(), k_graph, strategy, config.mod_cap);
            let name = format!("scc_queries.{tag}.csv");
            write_csv(
                &config.out_dir.join(&name),
                &[
                    "query",
                    "scc1_size",
                    "scc1_ratio",
                    "scc2_size",
                    "scc2_ratio",
                    "scc3_size",
                    "scc3_ratio",
                ],
                &sccs
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let get = |rank: usize| {
                            s.components.get(rank).map_or((0usize, 0.0), |c| {
                                (c.len(), c.len() as f64 / s.k as f64)
                            })
                        };
                        let (s1, r1) = get(0);
                        let (s2, r2) = get(1);
                        let (s3, r3) = get(2);
                        vec![
                            i.to_string(),
                            s1.to_string(),
                            r1.to_string(),
                            s2.to_string(),
                            r2.to_string(),
                            s3.to_string(),
                            r3.to_string(),
                        ]
                    })
                    .collect::<Vec<_>>(),
            )?;
            artifact_names.push(name);

            rows.push(SccTableRow {
                dataset: spec.name().to_string(),
                k_graph,
                strategy,
                mod_cap: config.mod_cap,
                k: config.k,
                mean_scc_sizes: sizes,
                mean_scc_ratios: ratios,
            });
        }
    }

    write_csv(
        &config.out_dir.join("scc.csv"),
        &[
            "dataset",
            "k_graph",
            "strategy",
            "mod_cap",
            "k",
            "scc1_size",
            "scc1_ratio",
            "scc2_size",
            "scc2_ratio",
            "scc3_size",
            "scc3_ratio",
        ],
        &rows
            .iter()
            .map(|r| {
                vec![
                    r.dataset.clone(),
                    r.k_graph.to_string(),
                    r.strategy.to_string(),
                    fmt_cap(r.mod_cap),
                    r.k.to_string(),
                    r.mean_scc_sizes[0].to_string(),
                    r.mean_scc_ratios[0].to_string(),
                    r.mean_scc_sizes[1].to_string(),
                    r.mean_scc_ratios[1].to_string(),
                    r.mean_scc_sizes[2].to_string(),
                    r.mean_scc_ratios[2].to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    artifact_names.push("scc.csv".into());

    let manifest = write_manifest(&config.out_dir, config, artifact_names.clone())?;
    Ok(SccTableReport {
        rows,
        artifacts: artifact_names
            .iter()
            .map(|n| config.out_dir.join(n))
            .chain([manifest])
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoPhaseRow {
    pub dataset: String,
    pub k_graph: usize,
    pub strategy: EdgeStrategy,
    pub mod_cap: Option<usize>,
    pub mean_recall: f64,
    pub mean_scc1_size: f64,
    pub mean_scc1_ratio: f64,
    pub mean_hops_phase1: f64,
    pub mean_hops_phase2: f64,
    pub entry_probability: f64,
    pub mean_fraction_visited: f64,
    /// Fraction of queries whose neighborhood satisfies the planted-premise
    /// condition (non-component boundary vertices all farther than the
    /// component).
    pub premise_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoPhaseReport {
    pub rows: Vec<TwoPhaseRow>,
    pub artifacts: Vec<PathBuf>,
}

/// Per-query trace decomposition around the maximum strongly connected
/// neighborhood, per dataset and strategy. Uses the first configured K.
pub fn run_two_phase(config: &ExperimentConfig) -> Result<TwoPhaseReport> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let k_graph = config.k_list[0];

    let mut rows = Vec::new();
    let mut artifact_names: Vec<String> = Vec::new();
    for spec in &config.datasets {
        let (base, queries) = resolve_dataset(spec, config.num_queries)?;
        let lists = all_member_knn(&base, k_graph).map_err(|e| with_dataset(spec.name(), e))?;
        for &strategy in &config.strategies {
            let (cell, _traces, sccs, _truths, g) =
                evaluate_cell(config, spec, &base, &queries, &lists, k_graph, strategy)?;
            let premises: Vec<bool> = queries
                .iter()
                .zip(&sccs)
                .map(|(q, scc)| traversal_premise_holds(&g, &base, q, scc.max_component()))
                .collect();

            let tag = cell_tag(spec.name(), k_graph, strategy, config.mod_cap);
            let name = format!("two_phase_queries.{tag}.csv");
            write_csv(
                &config.out_dir.join(&name),
                &[
                    "query",
                    "entry",
                    "recall",
                    "hop_count",
                    "hops_phase1",
                    "hops_phase2",
                    "entered",
                    "scc1_size",
                    "scc_fraction_visited",
                    "extra_true_nn",
                    "premise_holds",
                ],
                &cell
                    .per_query
                    .iter()
                    .zip(&premises)
                    .map(|(r, &premise)| {
                        vec![
                            r.query.to_string(),
                            r.entry.to_string(),
                            r.recall.to_string(),
                            r.hop_count.to_string(),
                            r.hops_phase1.to_string(),
                            r.hops_phase2.to_string(),
                            r.entered.to_string(),
                            r.scc1_size.to_string(),
                            r.scc_fraction_visited.to_string(),
                            r.extra_true_nn.to_string(),
                            premise.to_string(),
                        ]
                    })
                    .collect::<Vec<_>>(),
            )?;
            artifact_names.push(name);

            rows.push(TwoPhaseRow {
                dataset: spec.name().to_string(),
                k_graph,
                strategy,
                mod_cap: config.mod_cap,
                mean_recall: cell.mean_recall,
                mean_scc1_size: cell.mean_scc_sizes[0],
                mean_scc1_ratio: cell.mean_scc_ratios[0],
                mean_hops_phase1: mean(cell.per_query.iter().map(|r| r.hops_phase1 as f64)),
                mean_hops_phase2: mean(cell.per_query.iter().map(|r| r.hops_phase2 as f64)),
                entry_probability: cell.entry_probability,
                mean_fraction_visited: mean(
                    cell.per_query.iter().map(|r| r.scc_fraction_visited),
                ),
                premise_rate: mean(premises.iter().map(|&p| p as u8 as f64)),
            });
        }
    }

    write_csv(
        &config.out_dir.join("two_phase.csv"),
        &[
            "dataset",
            "k_graph",
            "strategy",
            "mod_cap",
            "mean_recall",
            "mean_scc1_size",
            "mean_scc1_ratio",
            "mean_hops_phase1",
            "mean_hops_phase2",
            "entry_probability",
            "mean_fraction_visited",
            "premise_rate",
        ],
        &rows
            .iter()
            .map(|r| {
                vec![
                    r.dataset.clone(),
                    r.k_graph.to_string(),
                    r.strategy.to_string(),
                    fmt_cap(r.mod_cap),
                    r.mean_recall.to_string(),
                    r.mean_scc1_size.to_string(),
                    r.mean_scc1_ratio.to_string(),
                    r.mean_hops_phase1.to_string(),
                    r.mean_hops_phase2.to_string(),
                    r.entry_probability.to_string(),
                    r.mean_fraction_visited.to_string(),
                    r.premise_rate.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    artifact_names.push("two_phase.csv".into());

    let manifest = write_manifest(&config.out_dir, config, artifact_names.clone())?;
    Ok(TwoPhaseReport {
        rows,
        artifacts: artifact_names
            .iter()
            .map(|n| config.out_dir.join(n))
            .chain([manifest])
            .collect(),
    })
}

#[derive(Debug, Serialize)]
struct TraversalRunConfig {
    trials: usize,
    seed: u64,
}

/// Runs the planted-instance traversal checker and writes its report.
pub fn run_theorem1(trials: usize, seed: u64, out_dir: &Path) -> Result<TraversalReport> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let report = verify_theorem1(trials, seed)?;
    write_json(&out_dir.join("theorem1.json"), &report)?;
    write_manifest(out_dir, &TraversalRunConfig { trials, seed }, vec!["theorem1.json".into()])?;
    Ok(report)
}
