//! Best-first beam search over a KNN graph, with a full replayable trace.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{squared_euclidean, Neighbor, NeighborList, VectorDataset};
use crate::graph::KnnGraph;
use crate::{Error, Result, VertexId};

/// How the entry vertex is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryRule {
    /// Uniform over 0..n from a dedicated seeded generator.
    Random { seed: u64 },
    Fixed(VertexId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    /// Result count.
    pub k: usize,
    /// Beam width: the bounded queue keeps the `l` nearest seen so far.
    pub l: usize,
    pub entry: EntryRule,
}

/// Record of one search run.
///
/// `pop_sequence` holds only expanded vertices, in expansion order; the pop
/// that triggers termination is not part of it. `pushes[i]` lists the
/// vertices first enqueued while expanding `pop_sequence[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub entry_vertex: VertexId,
    pub pop_sequence: Vec<(VertexId, f64)>,
    pub pushes: Vec<Vec<VertexId>>,
    pub result: NeighborList,
    pub hop_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueEntry {
    dist: f64,
    id: VertexId,
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

fn resolve_entry(rule: EntryRule, n: usize) -> Result<VertexId> {
    match rule {
        EntryRule::Fixed(id) => {
            if (id as usize) < n {
                Ok(id)
            } else {
                Err(Error::VertexOutOfRange { id: id as u64, n })
            }
        }
        EntryRule::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(rng.random_range(0..n as VertexId))
        }
    }
}

/// Runs one query.
///
/// Pops the nearest candidate, stops when its distance strictly exceeds the
/// farthest of the `l` nearest seen (once `l` have been seen), otherwise
/// expands the not-yet-seen out-neighbors. Each vertex is enqueued at most
/// once: a seen set covers pushed-or-expanded vertices, so duplicate pushes
/// are suppressed. Queue ties break by ascending id; fully deterministic.
pub fn search(
    g: &KnnGraph,
    data: &VectorDataset,
    q: &[f32],
    params: &SearchParams,
) -> Result<SearchTrace> {
    let n = g.n();
    if n != data.len() {
        return Err(Error::GraphDatasetMismatch {
            graph_n: n,
            data_n: data.len(),
        });
    }
    if q.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: q.len(),
        });
    }
    if let Some(index) = q.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (k, l) = (params.k, params.l);
    if k < 1 || k > l || l > n {
        return Err(Error::InvalidBeamWidth { k, l, n });
    }
    let entry = resolve_entry(params.entry, n)?;

    let dist_to = |v: VertexId| squared_euclidean(q, data.get(v as usize));

    let mut seen = vec![false; n];
    let mut cand: BinaryHeap<Reverse<QueueEntry>> = BinaryHeap::new();
    let mut result_l: BinaryHeap<QueueEntry> = BinaryHeap::new();
    let mut pop_sequence: Vec<(VertexId, f64)> = Vec::new();
    let mut pushes: Vec<Vec<VertexId>> = Vec::new();

    seen[entry as usize] = true;
    let e = QueueEntry {
        dist: dist_to(entry),
        id: entry,
    };
    cand.push(Reverse(e));
    result_l.push(e);

    while let Some(Reverse(v)) = cand.pop() {
        if result_l.len() == l {
            let bottom = result_l.peek().expect("result queue is nonempty");
            if v.dist > bottom.dist {
                break; // everything in the result queue is already expanded
            }
        }
        let mut new_pushes = Vec::new();
        for &e in g.neighbors(v.id) {
            if seen[e as usize] {
                continue;
            }
            seen[e as usize] = true;
            let entry = QueueEntry {
                dist: dist_to(e),
                id: e,
            };
            cand.push(Reverse(entry));
            result_l.push(entry);
            if result_l.len() > l {
                result_l.pop();
            }
            new_pushes.push(e);
        }
        pop_sequence.push((v.id, v.dist));
        pushes.push(new_pushes);
    }

    let result: NeighborList = result_l
        .into_sorted_vec()
        .into_iter()
        .take(k)
        .map(|qe| Neighbor {
            id: qe.id,
            dist: qe.dist,
        })
        .collect();

    let hop_count = pop_sequence.len();
    Ok(SearchTrace {
        entry_vertex: entry,
        pop_sequence,
        pushes,
        result,
        hop_count,
    })
}

/// Runs each query independently (in parallel); results keep query order.
///
/// With a random entry rule, query i draws its entry from seed + i, so a
/// batch is reproducible query-by-query: running `search` alone with the
/// derived seed gives the identical trace.
pub fn batch_search(
    g: &KnnGraph,
    data: &VectorDataset,
    queries: &[Vec<f32>],
    params: &SearchParams,
) -> Result<Vec<SearchTrace>> {
    queries
        .par_iter()
        .enumerate()
        .map(|(index, q)| {
            let params = SearchParams {
                entry: match params.entry {
                    EntryRule::Random { seed } => EntryRule::Random {
                        seed: seed.wrapping_add(index as u64),
                    },
                    fixed => fixed,
                },
                ..*params
            };
            search(g, data, q, &params).map_err(|e| Error::QueryFailed {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Writes one JSON object per line: entry vertex, pops as [id, distance]
/// pairs, and result ids.
pub fn write_traces_jsonl(path: impl AsRef<Path>, traces: &[SearchTrace]) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        entry: VertexId,
        pops: &'a [(VertexId, f64)],
        result: Vec<VertexId>,
    }
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for trace in traces {
        let line = Line {
            entry: trace.entry_vertex,
            pops: &trace.pop_sequence,
            result: trace.result.iter().map(|nb| nb.id).collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
