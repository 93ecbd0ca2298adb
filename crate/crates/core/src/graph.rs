//! KNN-graph construction with pluggable edge-selection strategies, plus
//! binary (de)serialization.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use crate::dataset::{all_member_knn, squared_euclidean, Neighbor, NeighborList, VectorDataset};
use crate::{Error, Result, VertexId};

/// How a vertex's out-edges are chosen from its exact K nearest neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum EdgeStrategy {
    /// One-way edge to each of the K nearest.
    #[serde(rename = "directed")]
    DirectedKnn,
    /// DirectedKnn plus every reverse edge.
    #[serde(rename = "undirected")]
    UndirectedKnn,
    /// Keep a neighbor only when no other candidate sits inside the lune
    /// (the intersection of the two open spheres) between vertex and
    /// neighbor.
    #[serde(rename = "rng")]
    RngPruned,
    /// Like RngPruned but the lune test runs only against already-kept
    /// neighbors, scanning candidates in ascending distance order.
    #[serde(rename = "mrng")]
    MrngPruned,
}

impl EdgeStrategy {
    fn tag(self) -> u8 {
        match self {
            EdgeStrategy::DirectedKnn => 0,
            EdgeStrategy::UndirectedKnn => 1,
            EdgeStrategy::RngPruned => 2,
            EdgeStrategy::MrngPruned => 3,
        }
    }

    fn from_tag(tag: u8) -> Option<Option<EdgeStrategy>> {
        match tag {
            0 => Some(Some(EdgeStrategy::DirectedKnn)),
            1 => Some(Some(EdgeStrategy::UndirectedKnn)),
            2 => Some(Some(EdgeStrategy::RngPruned)),
            3 => Some(Some(EdgeStrategy::MrngPruned)),
            4 => Some(None), // hand-assembled adjacency
            _ => None,
        }
    }
}

impl std::fmt::Display for EdgeStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EdgeStrategy::DirectedKnn => "directed",
            EdgeStrategy::UndirectedKnn => "undirected",
            EdgeStrategy::RngPruned => "rng",
            EdgeStrategy::MrngPruned => "mrng",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for EdgeStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "directed" => Ok(EdgeStrategy::DirectedKnn),
            "undirected" => Ok(EdgeStrategy::UndirectedKnn),
            "rng" => Ok(EdgeStrategy::RngPruned),
            "mrng" => Ok(EdgeStrategy::MrngPruned),
            other => Err(Error::InvalidParam(format!(
                "unknown edge strategy `{other}` (expected directed, undirected, rng, or mrng)"
            ))),
        }
    }
}

/// Directed adjacency over vertices 0..n-1. Out-lists are sorted ascending
/// by id, contain no self-loops or duplicates, and respect `mod_cap` when
/// one is set. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnGraph {
    n: usize,
    adjacency: Vec<Vec<VertexId>>,
    k: u32,
    strategy: Option<EdgeStrategy>,
    mod_cap: Option<u32>,
}

impl KnnGraph {
    /// Wraps a hand-assembled adjacency (fixtures, imported graphs).
    /// Lists are sorted; self-loops, duplicates, and out-of-range ids are
    /// rejected.
    pub fn from_adjacency(adjacency: Vec<Vec<VertexId>>) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut adjacency = adjacency;
        for (v, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            for pair in list.windows(2) {
                if pair[0] == pair[1] {
                    return Err(Error::InvalidParam(format!(
                        "duplicate edge {v} -> {}",
                        pair[0]
                    )));
                }
            }
            for &u in list.iter() {
                if u as usize >= n {
                    return Err(Error::VertexOutOfRange { id: u as u64, n });
                }
                if u as usize == v {
                    return Err(Error::InvalidParam(format!("self-loop at vertex {v}")));
                }
            }
        }
        Ok(KnnGraph {
            n,
            adjacency,
            k: 0,
            strategy: None,
            mod_cap: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k as usize
    }

    pub fn strategy(&self) -> Option<EdgeStrategy> {
        self.strategy
    }

    pub fn mod_cap(&self) -> Option<usize> {
        self.mod_cap.map(|c| c as usize)
    }

    /// Out-neighbors of `v`, ascending by id; panics when `v >= n`.
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adjacency[v as usize]
    }

    pub fn adjacency(&self) -> &[Vec<VertexId>] {
        &self.adjacency
    }

    pub fn out_degree(&self, v: VertexId) -> usize {
        self.adjacency[v as usize].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|l| l.len()).sum()
    }
}

/// Builds the graph for `data`: exact K nearest neighbors per vertex, edge
/// selection per `strategy`, reverse edges for UndirectedKnn, then `mod_cap`
/// truncation keeping the nearest by (distance, id).
pub fn build_graph(
    data: &VectorDataset,
    k: usize,
    strategy: EdgeStrategy,
    mod_cap: Option<usize>,
) -> Result<KnnGraph> {
    let lists = all_member_knn(data, k)?;
    build_graph_from_lists(data, &lists, k, strategy, mod_cap)
}

/// Same as [`build_graph`] but reuses precomputed member kNN lists (each at
/// least `k` long), so several K values can share one O(n^2) scan.
pub fn build_graph_from_lists(
    data: &VectorDataset,
    lists: &[NeighborList],
    k: usize,
    strategy: EdgeStrategy,
    mod_cap: Option<usize>,
) -> Result<KnnGraph> {
    let n = data.len();
    if lists.len() != n {
        return Err(Error::LengthMismatch {
            left: lists.len(),
            right: n,
        });
    }
    if k == 0 || k > n - 1 {
        return Err(Error::KOutOfRange { k, n: n - 1 });
    }
    if let Some(short) = lists.iter().position(|l| l.len() < k) {
        return Err(Error::InvalidParam(format!(
            "precomputed list for vertex {short} has {} entries, need {k}",
            lists[short].len()
        )));
    }
    if mod_cap == Some(0) {
        return Err(Error::InvalidParam("mod_cap must be >= 1".into()));
    }

    let candidates = |v: usize| &lists[v][..k];
    let mut selected: Vec<NeighborList> = match strategy {
        EdgeStrategy::DirectedKnn | EdgeStrategy::UndirectedKnn => {
            (0..n).map(|v| candidates(v).to_vec()).collect()
        }
        EdgeStrategy::RngPruned => (0..n)
            .into_par_iter()
            .map(|v| rng_prune(candidates(v), data))
            .collect(),
        EdgeStrategy::MrngPruned => (0..n)
            .into_par_iter()
            .map(|v| mrng_prune(candidates(v), data))
            .collect(),
    };

    if strategy == EdgeStrategy::UndirectedKnn {
        let mut reverse: Vec<NeighborList> = vec![Vec::new(); n];
        for (v, list) in selected.iter().enumerate() {
            for nb in list {
                reverse[nb.id as usize].push(Neighbor {
                    id: v as VertexId,
                    dist: nb.dist,
                });
            }
        }
        for (list, extra) in selected.iter_mut().zip(reverse) {
            list.extend(extra);
        }
    }

    let adjacency = selected
        .into_iter()
        .map(|mut list| {
            list.sort_unstable_by(|a, b| a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id)));
            // duplicates only arise from reverse-edge insertion; both copies
            // carry the bit-identical distance, so they sort adjacent
            list.dedup_by(|a, b| a.id == b.id);
            if let Some(cap) = mod_cap {
                list.truncate(cap);
            }
            let mut ids: Vec<VertexId> = list.into_iter().map(|nb| nb.id).collect();
            ids.sort_unstable();
            ids
        })
        .collect();

    Ok(KnnGraph {
        n,
        adjacency,
        k: k as u32,
        strategy: Some(strategy),
        mod_cap: mod_cap.map(|c| c as u32),
    })
}

/// Keeps candidate r iff no other candidate u has d(u,v) < d(v,r) and
/// d(u,r) < d(v,r) — strict inequalities on squared distances, so boundary
/// ties keep the edge. Candidates must be sorted ascending by distance
/// from the vertex whose list this is.
pub fn rng_prune(candidates: &[Neighbor], data: &VectorDataset) -> NeighborList {
    candidates
        .iter()
        .filter(|r| {
            !candidates.iter().any(|u| {
                u.dist < r.dist
                    && squared_euclidean(data.get(u.id as usize), data.get(r.id as usize))
                        < r.dist
            })
        })
        .copied()
        .collect()
}

/// Like [`rng_prune`] but each candidate is tested only against the
/// already-kept neighbors, scanning in ascending distance order.
pub fn mrng_prune(candidates: &[Neighbor], data: &VectorDataset) -> NeighborList {
    let mut kept: NeighborList = Vec::new();
    for r in candidates {
        let occluded = kept.iter().any(|u| {
            u.dist < r.dist
                && squared_euclidean(data.get(u.id as usize), data.get(r.id as usize)) < r.dist
        });
        if !occluded {
            kept.push(*r);
        }
    }
    kept
}

// ---------------------------------------------------------------------------
// Binary format: "KNNG" magic, u16 version, u8 strategy tag, u8 flags
// (bit0 = cap present), u32 n, u32 K, u32 cap, then per vertex a u32 degree
// followed by that many sorted u32 ids. All integers little-endian.

const MAGIC: [u8; 4] = *b"KNNG";
const VERSION: u16 = 1;
const MANUAL_TAG: u8 = 4;
const HEADER_LEN: u64 = 20;

pub fn save_graph(path: impl AsRef<Path>, g: &KnnGraph) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(&MAGIC).map_err(io)?;
    w.write_u16::<LittleEndian>(VERSION).map_err(io)?;
    w.write_u8(g.strategy.map_or(MANUAL_TAG, EdgeStrategy::tag))
        .map_err(io)?;
    w.write_u8(u8::from(g.mod_cap.is_some())).map_err(io)?;
    w.write_u32::<LittleEndian>(g.n as u32).map_err(io)?;
    w.write_u32::<LittleEndian>(g.k).map_err(io)?;
    w.write_u32::<LittleEndian>(g.mod_cap.unwrap_or(0)).map_err(io)?;
    for list in &g.adjacency {
        w.write_u32::<LittleEndian>(list.len() as u32).map_err(io)?;
        for &id in list {
            w.write_u32::<LittleEndian>(id).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<KnnGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let bad = |offset: u64, detail: &str| Error::BadRecord {
        path: path.into(),
        offset,
        detail: detail.into(),
    };
    let trunc = |offset: u64| Error::Truncated {
        path: path.into(),
        offset,
    };

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| trunc(0))?;
    if magic != MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    let version = r.read_u16::<LittleEndian>().map_err(|_| trunc(4))?;
    if version != VERSION {
        return Err(Error::BadVersion {
            path: path.into(),
            version,
        });
    }
    let tag = r.read_u8().map_err(|_| trunc(6))?;
    let strategy =
        EdgeStrategy::from_tag(tag).ok_or_else(|| bad(6, &format!("unknown strategy tag {tag}")))?;
    let flags = r.read_u8().map_err(|_| trunc(7))?;
    if flags & !1 != 0 {
        return Err(bad(7, &format!("unknown flags {flags:#x}")));
    }
    let n = r.read_u32::<LittleEndian>().map_err(|_| trunc(8))? as usize;
    if n == 0 {
        return Err(bad(8, "zero vertex count"));
    }
    let k = r.read_u32::<LittleEndian>().map_err(|_| trunc(12))?;
    let cap = r.read_u32::<LittleEndian>().map_err(|_| trunc(16))?;
    let mod_cap = if flags & 1 == 1 {
        if cap == 0 {
            return Err(bad(16, "cap flag set but cap is zero"));
        }
        Some(cap)
    } else {
        if cap != 0 {
            return Err(bad(16, "nonzero cap without cap flag"));
        }
        None
    };

    let mut offset = HEADER_LEN;
    let mut adjacency = Vec::with_capacity(n);
    for v in 0..n {
        let record_start = offset;
        let degree = r
            .read_u32::<LittleEndian>()
            .map_err(|_| trunc(record_start))? as usize;
        offset += 4;
        if degree >= n {
            return Err(bad(
                record_start,
                &format!("vertex {v} degree {degree} exceeds n-1"),
            ));
        }
        if let Some(cap) = mod_cap {
            if degree > cap as usize {
                return Err(bad(
                    record_start,
                    &format!("vertex {v} degree {degree} exceeds cap {cap}"),
                ));
            }
        }
        let mut list = vec![0u32; degree];
        r.read_u32_into::<LittleEndian>(&mut list)
            .map_err(|_| trunc(record_start))?;
        offset += 4 * degree as u64;
        for (i, &id) in list.iter().enumerate() {
            if id as usize >= n {
                return Err(bad(record_start, &format!("edge target {id} out of range")));
            }
            if id as usize == v {
                return Err(bad(record_start, &format!("self-loop at vertex {v}")));
            }
            if i > 0 && list[i - 1] >= id {
                return Err(bad(
                    record_start,
                    &format!("vertex {v} out-list not strictly ascending"),
                ));
            }
        }
        adjacency.push(list);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad(offset, "trailing bytes after last record"));
    }

    Ok(KnnGraph {
        n,
        adjacency,
        k,
        strategy,
        mod_cap,
    })
}
