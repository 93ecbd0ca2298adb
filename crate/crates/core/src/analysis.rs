//! Diagnostics over graphs and search traces: clustering coefficients,
//! query-neighborhood SCC structure, two-phase trace decomposition, recall,
//! and the guaranteed-traversal checker for planted instances.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{brute_force_knn, squared_euclidean, NeighborList, VectorDataset};
use crate::graph::{build_graph, EdgeStrategy, KnnGraph};
use crate::search::{search, EntryRule, SearchParams, SearchTrace};
use crate::{Error, Result, VertexId};

/// Per-vertex and mean clustering coefficients of a graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringReport {
    pub per_vertex: Vec<f64>,
    /// Arithmetic mean of `per_vertex` over all n vertices.
    pub global: f64,
    pub k: usize,
    pub strategy: Option<EdgeStrategy>,
}

/// Undirected adjacency: edge u-v iff either directed edge exists.
/// Lists sorted ascending, no duplicates.
pub fn symmetrize(g: &KnnGraph) -> Vec<Vec<VertexId>> {
    let mut und: Vec<Vec<VertexId>> = vec![Vec::new(); g.n()];
    for (v, list) in g.adjacency().iter().enumerate() {
        for &u in list {
            und[v].push(u);
            und[u as usize].push(v as VertexId);
        }
    }
    for list in &mut und {
        list.sort_unstable();
        list.dedup();
    }
    und
}

fn local_from_symmetrized(und: &[Vec<VertexId>], v: usize, marks: &mut [bool]) -> f64 {
    let nbrs = &und[v];
    let kv = nbrs.len();
    if kv < 2 {
        return 0.0;
    }
    for &u in nbrs {
        marks[u as usize] = true;
    }
    let mut linked_pairs = 0u64;
    for &u in nbrs {
        for &w in &und[u as usize] {
            if w > u && marks[w as usize] {
                linked_pairs += 1;
            }
        }
    }
    for &u in nbrs {
        marks[u as usize] = false;
    }
    linked_pairs as f64 / (kv as f64 * (kv as f64 - 1.0) / 2.0)
}

/// Fraction of neighbor pairs of `v` that are themselves connected, on the
/// symmetrized graph; vertices with fewer than two neighbors score 0.
pub fn local_clustering(g: &KnnGraph, v: VertexId) -> f64 {
    let und = symmetrize(g);
    let mut marks = vec![false; g.n()];
    local_from_symmetrized(&und, v as usize, &mut marks)
}

/// Mean local clustering over all vertices.
pub fn global_clustering(g: &KnnGraph) -> ClusteringReport {
    let und = symmetrize(g);
    let n = g.n();
    let per_vertex: Vec<f64> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![false; n],
            |marks, v| local_from_symmetrized(&und, v, marks),
        )
        .collect();
    let global = per_vertex.iter().sum::<f64>() / n as f64;
    ClusteringReport {
        per_vertex,
        global,
        k: g.k(),
        strategy: g.strategy(),
    }
}

/// Subgraph induced on the k nearest dataset members of a query vector:
/// `members` in ascending (distance, id) order, `adjacency` over local
/// indices with edge directions preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSubgraph {
    pub members: Vec<VertexId>,
    pub adjacency: Vec<Vec<usize>>,
}

pub fn neighborhood_subgraph(
    g: &KnnGraph,
    data: &VectorDataset,
    q: &[f32],
    k: usize,
) -> Result<NeighborhoodSubgraph> {
    if g.n() != data.len() {
        return Err(Error::GraphDatasetMismatch {
            graph_n: g.n(),
            data_n: data.len(),
        });
    }
    let members: Vec<VertexId> = brute_force_knn(data, q, k)?
        .into_iter()
        .map(|nb| nb.id)
        .collect();
    subgraph_from_members(g, members)
}

/// Induced subgraph over an already-computed member list (kept in the given
/// order), for callers that have the neighborhood at hand.
pub fn subgraph_from_members(g: &KnnGraph, members: Vec<VertexId>) -> Result<NeighborhoodSubgraph> {
    if let Some(&bad) = members.iter().find(|&&id| id as usize >= g.n()) {
        return Err(Error::VertexOutOfRange {
            id: bad as u64,
            n: g.n(),
        });
    }
    let local: HashMap<VertexId, usize> =
        members.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let adjacency = members
        .iter()
        .map(|&v| {
            g.neighbors(v)
                .iter()
                .filter_map(|u| local.get(u).copied())
                .collect()
        })
        .collect();
    Ok(NeighborhoodSubgraph { members, adjacency })
}

/// Strongly connected components of a query's neighborhood subgraph,
/// largest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SccReport {
    pub k: usize,
    /// Sorted by size descending, ties by smallest member id; members sorted
    /// ascending. The first entry is the maximum strongly connected
    /// neighborhood.
    pub components: Vec<Vec<VertexId>>,
}

impl SccReport {
    pub fn max_component(&self) -> &[VertexId] {
        &self.components[0]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.len()).collect()
    }

    /// Size of component `i` over k.
    pub fn ratio(&self, i: usize) -> f64 {
        self.components[i].len() as f64 / self.k as f64
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratio(0)
    }
}

/// Iterative Tarjan over an adjacency list; returns the components with
/// members in discovery order. Works on any index-based digraph.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNSET: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut components = Vec::new();
    let mut next = 0usize;
    let mut frames: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        frames.push((root, 0));
        while let Some(frame) = frames.last_mut() {
            let v = frame.0;
            if frame.1 < adj[v].len() {
                let u = adj[v][frame.1];
                frame.1 += 1;
                if index[u] == UNSET {
                    index[u] = next;
                    low[u] = next;
                    next += 1;
                    stack.push(u);
                    on_stack[u] = true;
                    frames.push((u, 0));
                } else if on_stack[u] {
                    low[v] = low[v].min(index[u]);
                }
            } else {
                frames.pop();
                if let Some(parent) = frames.last() {
                    let p = parent.0;
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    components.push(component);
                }
            }
        }
    }
    components
}

pub fn scc_decompose(sub: &NeighborhoodSubgraph) -> SccReport {
    let mut components: Vec<Vec<VertexId>> = tarjan_scc(&sub.adjacency)
        .into_iter()
        .map(|comp| {
            let mut ids: Vec<VertexId> = comp.into_iter().map(|i| sub.members[i]).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    SccReport {
        k: sub.members.len(),
        components,
    }
}

/// Two-phase decomposition of one trace against the query's maximum
/// strongly connected neighborhood C and its true kNN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseStats {
    /// Pops before the first pop of a C member (all pops when none occurs).
    pub hops_phase1: usize,
    pub hops_phase2: usize,
    pub entered: bool,
    /// |popped ∩ C| / |C|.
    pub scc_fraction_visited: f64,
    /// Pops at or after the phase boundary that are true kNN outside C.
    pub extra_true_nn: usize,
}

pub fn phase_split(
    trace: &SearchTrace,
    scc: &SccReport,
    truth: &NeighborList,
    n: usize,
) -> Result<PhaseStats> {
    if truth.is_empty() {
        return Err(Error::InconsistentInputs("empty ground-truth list".into()));
    }
    let mut truth_ids: Vec<VertexId> = truth.iter().map(|nb| nb.id).collect();
    truth_ids.sort_unstable();
    let mut scc_ids: Vec<VertexId> = scc.components.iter().flatten().copied().collect();
    scc_ids.sort_unstable();
    if scc_ids != truth_ids {
        return Err(Error::InconsistentInputs(
            "component members do not match the ground-truth neighborhood".into(),
        ));
    }
    for &(id, _) in &trace.pop_sequence {
        if id as usize >= n {
            return Err(Error::InconsistentInputs(format!(
                "popped vertex {id} outside dataset of {n}"
            )));
        }
    }
    for nb in &trace.result {
        if nb.id as usize >= n {
            return Err(Error::InconsistentInputs(format!(
                "result vertex {} outside dataset of {n}",
                nb.id
            )));
        }
    }

    let max_c = scc.max_component();
    let in_c = |id: VertexId| max_c.binary_search(&id).is_ok();
    let in_truth = |id: VertexId| truth_ids.binary_search(&id).is_ok();

    let boundary = trace.pop_sequence.iter().position(|&(id, _)| in_c(id));
    let entered = boundary.is_some();
    let hops_phase1 = boundary.unwrap_or(trace.hop_count);
    let hops_phase2 = trace.hop_count - hops_phase1;

    let visited = trace
        .pop_sequence
        .iter()
        .filter(|&&(id, _)| in_c(id))
        .count();
    let scc_fraction_visited = visited as f64 / max_c.len() as f64;

    let extra_true_nn = match boundary {
        None => 0,
        Some(b) => trace.pop_sequence[b..]
            .iter()
            .filter(|&&(id, _)| in_truth(id) && !in_c(id))
            .count(),
    };

    Ok(PhaseStats {
        hops_phase1,
        hops_phase2,
        entered,
        scc_fraction_visited,
        extra_true_nn,
    })
}

/// |result ∩ truth| / |truth|.
pub fn recall(result: &NeighborList, truth: &NeighborList) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InconsistentInputs("empty ground-truth list".into()));
    }
    let mut truth_ids: Vec<VertexId> = truth.iter().map(|nb| nb.id).collect();
    truth_ids.sort_unstable();
    let hits = result
        .iter()
        .filter(|nb| truth_ids.binary_search(&nb.id).is_ok())
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Fraction of traces whose pop sequence reaches the paired query's maximum
/// strongly connected neighborhood.
pub fn estimate_entry_probability(traces: &[SearchTrace], sccs: &[SccReport]) -> Result<f64> {
    if traces.len() != sccs.len() {
        return Err(Error::LengthMismatch {
            left: traces.len(),
            right: sccs.len(),
        });
    }
    if traces.is_empty() {
        return Err(Error::InconsistentInputs("no traces".into()));
    }
    let entered = traces
        .iter()
        .zip(sccs)
        .filter(|(t, s)| {
            let c = s.max_component();
            t.pop_sequence
                .iter()
                .any(|&(id, _)| c.binary_search(&id).is_ok())
        })
        .count();
    Ok(entered as f64 / traces.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateCorrelation(
            "need at least two points".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateCorrelation(
            "zero variance in an input".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

// ---------------------------------------------------------------------------
// Guaranteed-traversal checker on planted instances

/// One failed traversal: an entry inside the component from which some
/// members were never expanded.
#[derive(Debug, Clone, Serialize)]
pub struct TraversalCounterexample {
    pub trial: usize,
    pub dim: usize,
    pub graph_k: usize,
    pub strategy: EdgeStrategy,
    pub k: usize,
    pub component: Vec<VertexId>,
    pub entry: VertexId,
    pub missing: Vec<VertexId>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraversalReport {
    pub trials: usize,
    pub passed: usize,
    pub counterexamples: Vec<TraversalCounterexample>,
}

impl TraversalReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.trials && self.counterexamples.is_empty()
    }
}

/// Checks whether every vertex outside `component` with an edge to or from a
/// component member is strictly farther from `q` than every member.
pub fn traversal_premise_holds(
    g: &KnnGraph,
    data: &VectorDataset,
    q: &[f32],
    component: &[VertexId],
) -> bool {
    let in_c = |id: VertexId| component.binary_search(&id).is_ok();
    let max_member_dist = component
        .iter()
        .map(|&id| squared_euclidean(q, data.get(id as usize)))
        .fold(0.0f64, f64::max);
    let mut adjacent: Vec<VertexId> = Vec::new();
    for &m in component {
        adjacent.extend(g.neighbors(m).iter().copied().filter(|&u| !in_c(u)));
    }
    for (v, list) in g.adjacency().iter().enumerate() {
        if !in_c(v as VertexId) && list.iter().any(|&u| in_c(u)) {
            adjacent.push(v as VertexId);
        }
    }
    adjacent
        .iter()
        .all(|&u| squared_euclidean(q, data.get(u as usize)) > max_member_dist)
}

/// Runs `n_trials` planted instances: a tight cluster of m points next to a
/// query with everything else far away, K around m, then a beam-width-m
/// search from every member of the query's maximum strongly connected
/// neighborhood. Each member must appear in every pop sequence; violations
/// are reported verbatim.
pub fn verify_theorem1(n_trials: usize, seed: u64) -> Result<TraversalReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = TraversalReport {
        trials: n_trials,
        passed: 0,
        counterexamples: Vec::new(),
    };

    for trial in 0..n_trials {
        let dim = rng.random_range(2..=6);
        let m = rng.random_range(2..=8usize);
        let n_far = rng.random_range(15..=40usize);
        let strategy = if rng.random::<bool>() {
            EdgeStrategy::UndirectedKnn
        } else {
            EdgeStrategy::DirectedKnn
        };
        let graph_k = (m - 1 + rng.random_range(0..=2usize)).clamp(1, m + n_far - 1);

        // Plant until the premise holds; the geometry makes the first
        // attempt succeed essentially always, the loop is a safety net.
        let mut attempt = 0;
        let (data, g, q, scc) = loop {
            attempt += 1;
            let (data, q) = plant_cluster(&mut rng, dim, m, n_far);
            let g = build_graph(&data, graph_k, strategy, None)?;
            let sub = neighborhood_subgraph(&g, &data, &q, m)?;
            let scc = scc_decompose(&sub);
            if traversal_premise_holds(&g, &data, &q, scc.max_component()) {
                break (data, g, q, scc);
            }
            if attempt >= 50 {
                return Err(Error::InconsistentInputs(format!(
                    "trial {trial}: planted premise unsatisfied after {attempt} attempts"
                )));
            }
        };

        let component = scc.max_component().to_vec();
        let mut trial_ok = true;
        for &entry in &component {
            let trace = search(
                &g,
                &data,
                &q,
                &SearchParams {
                    k: m,
                    l: m,
                    entry: EntryRule::Fixed(entry),
                },
            )?;
            let popped: Vec<VertexId> = trace.pop_sequence.iter().map(|p| p.0).collect();
            let missing: Vec<VertexId> = component
                .iter()
                .copied()
                .filter(|id| !popped.contains(id))
                .collect();
            if !missing.is_empty() {
                trial_ok = false;
                report.counterexamples.push(TraversalCounterexample {
                    trial,
                    dim,
                    graph_k,
                    strategy,
                    k: m,
                    component: component.clone(),
                    entry,
                    missing,
                });
            }
        }
        if trial_ok {
            report.passed += 1;
        }
    }
    Ok(report)
}

/// m points within radius 0.02 of a central query, n_far points at distance
/// at least 0.25; ids 0..m are the cluster.
fn plant_cluster(
    rng: &mut ChaCha8Rng,
    dim: usize,
    m: usize,
    n_far: usize,
) -> (VectorDataset, Vec<f32>) {
    let q: Vec<f32> = (0..dim).map(|_| 0.3 + 0.4 * rng.random::<f32>()).collect();
    let spread = 0.02 / (dim as f64).sqrt();
    let mut rows: Vec<Vec<f32>> = Vec::with_capacity(m + n_far);
    for _ in 0..m {
        rows.push(
            q.iter()
                .map(|&c| c + (spread * (2.0 * rng.random::<f64>() - 1.0)) as f32)
                .collect(),
        );
    }
    for _ in 0..n_far {
        loop {
            let p: Vec<f32> = (0..dim).map(|_| rng.random::<f32>()).collect();
            if squared_euclidean(&q, &p) >= 0.0625 {
                rows.push(p);
                break;
            }
        }
    }
    let data = VectorDataset::from_rows("planted", rows).expect("planted rows are finite");
    (data, q)
}
