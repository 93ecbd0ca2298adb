mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use gknn_core::dataset::{load_vectors, save_ivecs, VectorDataset};
use gknn_core::graph::{build_graph, load_graph, save_graph, EdgeStrategy};
use gknn_core::harness::{
    run_cc_vs_k, run_cc_vs_recall, run_scc_tables, run_theorem1, run_two_phase, ExperimentConfig,
};
use gknn_core::search::{batch_search, write_traces_jsonl, EntryRule, SearchParams};

use config::{
    infer_format, parse_comma_list, parse_config_file, parse_dataset_spec, PartialConfig,
    TableKind,
};

#[derive(Parser)]
#[command(
    name = "gknn",
    version,
    about = "Build kNN graphs, run traced best-first search, and emit analysis tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a kNN graph file from a vector dataset.
    Build(BuildArgs),
    /// Search a graph with a batch of queries, writing traces or result ids.
    Search(SearchArgs),
    /// Run an experiment table and write its CSV/JSON artifacts.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Input vectors (fvecs or csv; inferred from extension unless --format).
    #[arg(long)]
    input: PathBuf,
    /// Input format: fvecs | csv.
    #[arg(long)]
    format: Option<String>,
    /// Neighbors per vertex before strategy-specific edits.
    #[arg(long)]
    k: usize,
    /// Edge strategy: directed | undirected | rng | mrng.
    #[arg(long)]
    strategy: String,
    /// Maximum out-degree cap.
    #[arg(long)]
    cap: Option<usize>,
    /// Output graph file.
    #[arg(long)]
    out: PathBuf,
    /// Worker thread cap (default: GKNN_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SearchArgs {
    /// Graph file produced by `build`.
    #[arg(long)]
    graph: PathBuf,
    /// Vectors the graph was built from.
    #[arg(long)]
    data: PathBuf,
    /// Query vectors (fvecs or csv, inferred from extension).
    #[arg(long)]
    queries: PathBuf,
    /// Result size per query.
    #[arg(long)]
    k: usize,
    /// Beam width (>= k).
    #[arg(long)]
    l: usize,
    /// Entry rule: `random` (per-query seeded) or `fixed:ID`.
    #[arg(long, default_value = "random")]
    entry: String,
    /// Seed for random entry selection.
    #[arg(long)]
    seed: Option<u64>,
    /// Output format: jsonl (full traces) | ivecs (result ids only).
    #[arg(long, default_value = "jsonl")]
    format: String,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Worker thread cap (default: GKNN_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Table to produce: cc-vs-k | cc-vs-recall | scc | two-phase | theorem1.
    #[arg(long)]
    table: Option<String>,
    /// Optional key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset spec, repeatable: `uniform:name=..,n=..,dim=..,seed=..`,
    /// `clusters:...,clusters=..,sigma=..`, or `file:name=..,path=..`.
    #[arg(long = "dataset")]
    datasets: Vec<String>,
    /// Comma-separated graph K values.
    #[arg(long = "k-list")]
    k_list: Option<String>,
    /// Comma-separated edge strategies.
    #[arg(long)]
    strategies: Option<String>,
    /// Maximum out-degree cap (a number, or `none`).
    #[arg(long)]
    cap: Option<String>,
    /// Held-out queries per dataset.
    #[arg(long = "num-queries")]
    num_queries: Option<usize>,
    /// Query-time result size.
    #[arg(long)]
    k: Option<usize>,
    /// Beam width (>= k).
    #[arg(long)]
    l: Option<usize>,
    /// Experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Planted-instance count (theorem1 table only).
    #[arg(long)]
    trials: Option<usize>,
    /// Directory for artifacts.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Worker thread cap (default: GKNN_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
}

enum CliError {
    /// Bad flags or config: exit 2, nothing written.
    Usage(String),
    /// Runtime failure: exit 1.
    Fail(String),
}

impl From<gknn_core::Error> for CliError {
    fn from(e: gknn_core::Error) -> Self {
        CliError::Fail(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(args) => cmd_build(args),
        Command::Search(args) => cmd_search(args),
        Command::Analyze(args) => cmd_analyze(args),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Fail(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let limit = match flag {
        Some(n) => Some(n),
        None => match std::env::var("GKNN_THREADS") {
            Ok(s) => Some(
                s.trim()
                    .parse()
                    .map_err(|_| usage(format!("GKNN_THREADS=`{s}` is not a thread count")))?,
            ),
            Err(_) => None,
        },
    };
    match limit {
        Some(0) => Err(usage("thread count must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Fail(format!("thread pool: {e}"))),
        None => Ok(()),
    }
}

fn load_dataset(path: &Path, format: Option<&str>, name: &str) -> Result<VectorDataset, CliError> {
    let format = match format {
        Some(f) => f.parse().map_err(|e: gknn_core::Error| usage(e.to_string()))?,
        None => infer_format(path),
    };
    Ok(load_vectors(path, format, name)?)
}

/// Writes through a temp file in the destination directory so failures never
/// leave a partial output and re-runs replace atomically.
fn persist_via_temp(
    out: &Path,
    write: impl FnOnce(&Path) -> gknn_core::Result<()>,
) -> Result<(), CliError> {
    let dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Fail(format!("{}: {e}", dir.display())))?;
    write(tmp.path())?;
    tmp.persist(out)
        .map_err(|e| CliError::Fail(format!("{}: {e}", out.display())))?;
    Ok(())
}

fn cmd_build(args: BuildArgs) -> Result<serde_json::Value, CliError> {
    init_threads(args.threads)?;
    let strategy: EdgeStrategy = args
        .strategy
        .parse()
        .map_err(|e: gknn_core::Error| usage(e.to_string()))?;
    let data = load_dataset(&args.input, args.format.as_deref(), "input")?;
    let start = Instant::now();
    let g = build_graph(&data, args.k, strategy, args.cap)?;
    let build_seconds = start.elapsed().as_secs_f64();
    persist_via_temp(&args.out, |tmp| save_graph(tmp, &g))?;
    Ok(json!({
        "n": g.n(),
        "dim": data.dim(),
        "k": g.k(),
        "strategy": strategy.to_string(),
        "cap": args.cap,
        "edges": g.edge_count(),
        "mean_out_degree": g.edge_count() as f64 / g.n() as f64,
        "build_seconds": build_seconds,
        "out": args.out.display().to_string(),
    }))
}

fn cmd_search(args: SearchArgs) -> Result<serde_json::Value, CliError> {
    init_threads(args.threads)?;
    if args.k == 0 || args.l < args.k {
        return Err(usage(format!(
            "need 1 <= k <= l, got k={} l={}",
            args.k, args.l
        )));
    }
    let entry = match args.entry.as_str() {
        "random" => {
            let seed = args
                .seed
                .ok_or_else(|| usage("--entry random requires --seed"))?;
            EntryRule::Random { seed }
        }
        other => match other.strip_prefix("fixed:").map(str::parse) {
            Some(Ok(id)) => EntryRule::Fixed(id),
            _ => return Err(usage(format!("bad entry rule `{other}` (random or fixed:ID)"))),
        },
    };
    if !matches!(args.format.as_str(), "jsonl" | "ivecs") {
        return Err(usage(format!(
            "bad output format `{}` (jsonl or ivecs)",
            args.format
        )));
    }

    let g = load_graph(&args.graph)?;
    let data = load_dataset(&args.data, None, "data")?;
    let queries = load_dataset(&args.queries, None, "queries")?.to_rows();
    let params = SearchParams {
        k: args.k,
        l: args.l,
        entry,
    };
    let traces = batch_search(&g, &data, &queries, &params)?;

    if args.format == "jsonl" {
        persist_via_temp(&args.out, |tmp| write_traces_jsonl(tmp, &traces))?;
    } else {
        let rows: Vec<Vec<u32>> = traces
            .iter()
            .map(|t| t.result.iter().map(|nb| nb.id).collect())
            .collect();
        persist_via_temp(&args.out, |tmp| save_ivecs(tmp, &rows))?;
    }

    let mean_hops =
        traces.iter().map(|t| t.hop_count as f64).sum::<f64>() / traces.len().max(1) as f64;
    Ok(json!({
        "queries": traces.len(),
        "k": args.k,
        "l": args.l,
        "entry": args.entry,
        "seed": args.seed,
        "format": args.format,
        "mean_hops": mean_hops,
        "out": args.out.display().to_string(),
    }))
}

fn require<T>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| usage(format!("missing `--{key}` (or config key `{key}`)")))
}

fn merged_analyze_config(args: &AnalyzeArgs) -> Result<PartialConfig, CliError> {
    let from_file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Fail(format!("{}: {e}", path.display())))?;
            parse_config_file(path, &text).map_err(usage)?
        }
        None => PartialConfig::default(),
    };
    let mut flags = PartialConfig {
        table: match &args.table {
            Some(t) => Some(t.parse().map_err(usage)?),
            None => None,
        },
        k_list: match &args.k_list {
            Some(s) => Some(parse_comma_list(s, "K value").map_err(usage)?),
            None => None,
        },
        strategies: match &args.strategies {
            Some(s) => Some(parse_comma_list(s, "strategy").map_err(usage)?),
            None => None,
        },
        cap: match args.cap.as_deref() {
            Some("none") => Some(None),
            Some(s) => Some(Some(s.parse().map_err(|_| {
                usage(format!("bad cap `{s}` (a number, or `none`)"))
            })?)),
            None => None,
        },
        num_queries: args.num_queries,
        k: args.k,
        l: args.l,
        seed: args.seed,
        trials: args.trials,
        out_dir: args.out_dir.clone(),
        ..PartialConfig::default()
    };
    for spec in &args.datasets {
        flags.datasets.push(parse_dataset_spec(spec).map_err(usage)?);
    }
    Ok(from_file.overridden_by(flags))
}

/// Runs a harness routine into a temp dir inside `out_dir`, then moves the
/// finished artifacts up, so a failed run leaves nothing behind.
fn staged<T>(
    out_dir: &Path,
    run: impl FnOnce(&Path) -> gknn_core::Result<(T, Vec<PathBuf>)>,
) -> Result<(T, Vec<PathBuf>), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Fail(format!("{}: {e}", out_dir.display())))?;
    let stage = tempfile::tempdir_in(out_dir)
        .map_err(|e| CliError::Fail(format!("{}: {e}", out_dir.display())))?;
    let (report, artifacts) = run(stage.path())?;
    let mut moved = Vec::new();
    for src in artifacts {
        let name = src.file_name().expect("artifact paths are files");
        let dst = out_dir.join(name);
        std::fs::rename(&src, &dst)
            .map_err(|e| CliError::Fail(format!("{}: {e}", dst.display())))?;
        moved.push(dst);
    }
    moved.sort();
    Ok((report, moved))
}

fn artifact_strings(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<serde_json::Value, CliError> {
    init_threads(args.threads)?;
    let merged = merged_analyze_config(&args)?;
    let table = require(merged.table, "table")?;
    let out_dir = require(merged.out_dir.clone(), "out-dir")?;
    let seed = require(merged.seed, "seed")?;

    if table == TableKind::Theorem1 {
        let trials = merged.trials.unwrap_or(200);
        let (report, artifacts) = staged(&out_dir, |stage| {
            let report = run_theorem1(trials, seed, stage)?;
            let files = vec![stage.join("theorem1.json"), stage.join("manifest.json")];
            Ok((report, files))
        })?;
        return Ok(json!({
            "table": "theorem1",
            "trials": report.trials,
            "passed": report.passed,
            "all_passed": report.all_passed(),
            "artifacts": artifact_strings(&artifacts),
        }));
    }

    let datasets = merged.datasets.clone();
    if datasets.is_empty() {
        return Err(usage("no datasets given (repeat --dataset or use a config file)"));
    }
    let config = ExperimentConfig {
        datasets,
        k_list: require(merged.k_list, "k-list")?,
        strategies: require(merged.strategies, "strategies")?,
        mod_cap: merged.cap.flatten(),
        num_queries: require(merged.num_queries, "num-queries")?,
        k: require(merged.k, "k")?,
        l: require(merged.l, "l")?,
        seed,
        out_dir: PathBuf::new(), // set per stage below
    };

    match table {
        TableKind::CcVsK => {
            let (report, artifacts) = staged(&out_dir, |stage| {
                let mut c = config.clone();
                c.out_dir = stage.into();
                let r = run_cc_vs_k(&c)?;
                let files = r.artifacts.clone();
                Ok((r, files))
            })?;
            Ok(json!({
                "table": "cc-vs-k",
                "rows": report.rows.len(),
                "artifacts": artifact_strings(&artifacts),
            }))
        }
        TableKind::CcVsRecall => {
            let (report, artifacts) = staged(&out_dir, |stage| {
                let mut c = config.clone();
                c.out_dir = stage.into();
                let r = run_cc_vs_recall(&c)?;
                let files = r.artifacts.clone();
                Ok((r, files))
            })?;
            Ok(json!({
                "table": "cc-vs-recall",
                "pearson_cc_recall": report.pearson_cc_recall,
                "cells": report
                    .cells
                    .iter()
                    .map(|c| {
                        json!({
                            "dataset": c.dataset,
                            "clustering_coefficient": c.clustering_coefficient,
                            "mean_recall": c.mean_recall,
                        })
                    })
                    .collect::<Vec<_>>(),
                "artifacts": artifact_strings(&artifacts),
            }))
        }
        TableKind::Scc => {
            let (report, artifacts) = staged(&out_dir, |stage| {
                let mut c = config.clone();
                c.out_dir = stage.into();
                let r = run_scc_tables(&c)?;
                let files = r.artifacts.clone();
                Ok((r, files))
            })?;
            Ok(json!({
                "table": "scc",
                "rows": report.rows.len(),
                "artifacts": artifact_strings(&artifacts),
            }))
        }
        TableKind::TwoPhase => {
            let (report, artifacts) = staged(&out_dir, |stage| {
                let mut c = config.clone();
                c.out_dir = stage.into();
                let r = run_two_phase(&c)?;
                let files = r.artifacts.clone();
                Ok((r, files))
            })?;
            Ok(json!({
                "table": "two-phase",
                "rows": report.rows.len(),
                "artifacts": artifact_strings(&artifacts),
            }))
        }
        TableKind::Theorem1 => unreachable!("handled above"),
    }
}
