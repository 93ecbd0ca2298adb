//! Vector storage, distances, exact kNN, file ingestion, synthetic data.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::{Error, Result, VertexId};

/// Dense float vectors with ids 0..n-1, stored row-major.
///
/// All components are validated finite at construction; the struct is
/// immutable afterwards, so a dataset can be shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorDataset {
    dim: usize,
    data: Vec<f32>,
    name: String,
}

impl VectorDataset {
    /// Builds a dataset from a flat row-major buffer of `n * dim` floats.
    pub fn from_flat(name: impl Into<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("dim must be >= 1".into()));
        }
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidParam(format!(
                "flat buffer length {} is not a multiple of dim {}",
                data.len(),
                dim
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(VectorDataset {
            dim,
            data,
            name: name.into(),
        })
    }

    /// Builds a dataset from per-vector rows, which must all share a length.
    pub fn from_rows(name: impl Into<String>, rows: Vec<Vec<f32>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(name, dim, data)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Row accessor; panics when `id >= n`, like slice indexing.
    pub fn get(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f32>> {
        self.iter().map(|row| row.to_vec()).collect()
    }

    /// Splits off the last `holdout` vectors as a separate query set.
    pub fn split_holdout(self, holdout: usize) -> Result<(VectorDataset, VectorDataset)> {
        let n = self.len();
        if holdout == 0 || holdout >= n {
            return Err(Error::InvalidParam(format!(
                "holdout {holdout} must be in 1..{n}"
            )));
        }
        let split = (n - holdout) * self.dim;
        let mut base = self.data;
        let queries = base.split_off(split);
        Ok((
            VectorDataset {
                dim: self.dim,
                data: base,
                name: self.name.clone(),
            },
            VectorDataset {
                dim: self.dim,
                data: queries,
                name: format!("{}-queries", self.name),
            },
        ))
    }
}

/// One entry of a neighbor list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: VertexId,
    pub dist: f64,
}

/// Neighbors sorted ascending by (distance, id); never contains the query's
/// own id when the query is a dataset member addressed by id.
pub type NeighborList = Vec<Neighbor>;

/// Squared Euclidean distance with input validation.
pub fn distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    for (index, v) in a.iter().chain(b.iter()).enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                index: index % a.len(),
            });
        }
    }
    Ok(squared_euclidean(a, b))
}

/// Unchecked fast path; callers guarantee equal lengths and finite values.
/// Accumulates in double precision regardless of the f32 storage.
pub fn squared_euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (&x, &y)| {
            let d = x as f64 - y as f64;
            acc + d * d
        })
}

fn check_k(k: usize, limit: usize) -> Result<()> {
    if k == 0 || k > limit {
        Err(Error::KOutOfRange { k, n: limit })
    } else {
        Ok(())
    }
}

/// Exact k nearest neighbors of an out-of-sample query vector.
pub fn brute_force_knn(data: &VectorDataset, q: &[f32], k: usize) -> Result<NeighborList> {
    check_k(k, data.len())?;
    if q.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: q.len(),
        });
    }
    let mut all: Vec<Neighbor> = data
        .iter()
        .enumerate()
        .map(|(id, v)| Neighbor {
            id: id as VertexId,
            dist: squared_euclidean(q, v),
        })
        .collect();
    Ok(take_k_nearest(&mut all, k))
}

/// Exact k nearest neighbors of dataset member `id`, excluding itself.
pub fn knn_of_member(data: &VectorDataset, id: VertexId, k: usize) -> Result<NeighborList> {
    let n = data.len();
    if (id as usize) >= n {
        return Err(Error::VertexOutOfRange { id: id as u64, n });
    }
    check_k(k, n - 1)?;
    let q = data.get(id as usize);
    let mut all: Vec<Neighbor> = data
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != id as usize)
        .map(|(j, v)| Neighbor {
            id: j as VertexId,
            dist: squared_euclidean(q, v),
        })
        .collect();
    Ok(take_k_nearest(&mut all, k))
}

/// Member kNN lists for every vertex, in parallel. This is the O(n^2)
/// scan behind exact graph construction.
pub fn all_member_knn(data: &VectorDataset, k: usize) -> Result<Vec<NeighborList>> {
    check_k(k, data.len().saturating_sub(1))?;
    (0..data.len() as VertexId)
        .into_par_iter()
        .map(|id| knn_of_member(data, id, k))
        .collect()
}

fn take_k_nearest(all: &mut [Neighbor], k: usize) -> NeighborList {
    let cmp = |a: &Neighbor, b: &Neighbor| {
        a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id))
    };
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, cmp);
    }
    let head = &mut all[..k];
    head.sort_unstable_by(cmp);
    head.to_vec()
}

// ---------------------------------------------------------------------------
// File formats

/// Reads an fvecs file: records of a little-endian u32 dimension followed by
/// that many little-endian f32 components; every record must share the
/// dimension.
pub fn load_fvecs(path: impl AsRef<Path>, name: impl Into<String>) -> Result<VectorDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut data = Vec::new();
    let mut dim: Option<usize> = None;
    let mut offset: u64 = 0;
    loop {
        let record_start = offset;
        let d = match read_record_dim(&mut reader, path, record_start)? {
            Some(d) => d,
            None => break,
        };
        offset += 4;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::InconsistentDim {
                    path: path.into(),
                    offset: record_start,
                    expected,
                    got: d,
                })
            }
            Some(_) => {}
        }
        let start = data.len();
        data.resize(start + d, 0.0f32);
        reader
            .read_f32_into::<LittleEndian>(&mut data[start..])
            .map_err(|e| map_record_err(e, path, record_start))?;
        offset += 4 * d as u64;
    }
    let dim = dim.ok_or(Error::EmptyDataset)?;
    VectorDataset::from_flat(name, dim, data)
}

/// Writes an fvecs file; inverse of [`load_fvecs`], bit-exact round trip.
pub fn save_fvecs(path: impl AsRef<Path>, data: &VectorDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in data.iter() {
        w.write_u32::<LittleEndian>(data.dim() as u32)
            .map_err(|e| Error::io(path, e))?;
        for &v in row {
            w.write_f32::<LittleEndian>(v).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an ivecs file (fvecs layout with signed 32-bit integers), used for
/// neighbor-id ground-truth files. Negative entries are rejected.
pub fn load_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<VertexId>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut rows = Vec::new();
    let mut offset: u64 = 0;
    loop {
        let record_start = offset;
        let d = match read_record_dim(&mut reader, path, record_start)? {
            Some(d) => d,
            None => break,
        };
        offset += 4;
        let mut row = vec![0i32; d];
        reader
            .read_i32_into::<LittleEndian>(&mut row)
            .map_err(|e| map_record_err(e, path, record_start))?;
        if let Some(neg) = row.iter().find(|&&v| v < 0) {
            return Err(Error::BadRecord {
                path: path.into(),
                offset: record_start,
                detail: format!("negative id {neg}"),
            });
        }
        rows.push(row.into_iter().map(|v| v as VertexId).collect());
        offset += 4 * d as u64;
    }
    Ok(rows)
}

/// Writes an ivecs file; rows may have unequal lengths (each record carries
/// its own count).
pub fn save_ivecs(path: impl AsRef<Path>, rows: &[Vec<VertexId>]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        w.write_u32::<LittleEndian>(row.len() as u32)
            .map_err(|e| Error::io(path, e))?;
        for &v in row {
            w.write_i32::<LittleEndian>(v as i32)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_record_dim(
    reader: &mut impl Read,
    path: &Path,
    record_start: u64,
) -> Result<Option<usize>> {
    let mut buf = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let got = reader
            .read(&mut buf[filled..])
            .map_err(|e| Error::io(path, e))?;
        if got == 0 {
            return if filled == 0 {
                Ok(None) // clean EOF at a record boundary
            } else {
                Err(Error::Truncated {
                    path: path.into(),
                    offset: record_start,
                })
            };
        }
        filled += got;
    }
    let d = u32::from_le_bytes(buf);
    if d == 0 {
        return Err(Error::BadRecord {
            path: path.into(),
            offset: record_start,
            detail: "zero-dimension record".into(),
        });
    }
    Ok(Some(d as usize))
}

fn map_record_err(e: io::Error, path: &Path, record_start: u64) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Truncated {
            path: path.into(),
            offset: record_start,
        }
    } else {
        Error::io(path, e)
    }
}

/// Reads a CSV file with one comma-separated vector per line (no header).
pub fn load_csv(path: impl AsRef<Path>, name: impl Into<String>) -> Result<VectorDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                if let csv::ErrorKind::Io(io_err) = e.into_kind() {
                    Error::io(path, io_err)
                } else {
                    unreachable!()
                }
            }
            _ => Error::Csv(e),
        })?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 1;
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            let v: f32 = field.trim().parse().map_err(|_| Error::BadCsvValue {
                path: path.into(),
                line,
                value: field.to_string(),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    VectorDataset::from_rows(name, rows)
}

/// Writes one vector per line; float formatting is shortest-round-trip, so
/// load_csv(save_csv(D)) reproduces D bit-exactly.
pub fn save_csv(path: impl AsRef<Path>, data: &VectorDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in data.iter() {
        let line = row
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Dispatch on a format tag; `fvecs` or `csv`.
pub fn load_vectors(
    path: impl AsRef<Path>,
    format: VectorFormat,
    name: impl Into<String>,
) -> Result<VectorDataset> {
    match format {
        VectorFormat::Fvecs => load_fvecs(path, name),
        VectorFormat::Csv => load_csv(path, name),
    }
}

pub fn save_vectors(
    path: impl AsRef<Path>,
    format: VectorFormat,
    data: &VectorDataset,
) -> Result<()> {
    match format {
        VectorFormat::Fvecs => save_fvecs(path, data),
        VectorFormat::Csv => save_csv(path, data),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorFormat {
    Fvecs,
    Csv,
}

impl std::str::FromStr for VectorFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fvecs" => Ok(VectorFormat::Fvecs),
            "csv" => Ok(VectorFormat::Csv),
            other => Err(Error::InvalidParam(format!(
                "unknown vector format `{other}` (expected fvecs or csv)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic generation

/// Synthetic dataset family.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Components i.i.d. uniform on [0,1).
    Uniform,
    /// `clusters` centers drawn uniformly from the unit cube, then each point
    /// is an isotropic Gaussian draw (std `sigma`) around a uniformly chosen
    /// center.
    GaussianClusters { clusters: usize, sigma: f64 },
}

/// Deterministic for a given seed; the stream is ChaCha8 keyed by `seed`.
pub fn generate_synthetic(
    kind: SyntheticKind,
    n: usize,
    dim: usize,
    seed: u64,
    name: impl Into<String>,
) -> Result<VectorDataset> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidParam(format!(
            "n={n} and dim={dim} must both be >= 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = match kind {
        SyntheticKind::Uniform => (0..n * dim).map(|_| rng.random::<f32>()).collect(),
        SyntheticKind::GaussianClusters { clusters, sigma } => {
            if clusters == 0 {
                return Err(Error::InvalidParam("cluster count must be >= 1".into()));
            }
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "sigma must be a positive finite number, got {sigma}"
                )));
            }
            let centers: Vec<f64> = (0..clusters * dim)
                .map(|_| rng.random::<f32>() as f64)
                .collect();
            let normal = Normal::new(0.0f64, sigma)
                .map_err(|e| Error::InvalidParam(e.to_string()))?;
            let mut data = Vec::with_capacity(n * dim);
            for _ in 0..n {
                let c = rng.random_range(0..clusters);
                let center = &centers[c * dim..(c + 1) * dim];
                for &mu in center {
                    data.push((mu + normal.sample(&mut rng)) as f32);
                }
            }
            data
        }
    };
    VectorDataset::from_flat(name, dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BinaryHeap;

    #[test]
    fn distance_identity() {
        assert_eq!(distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn distance_three_four_five() {
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
    }

    #[test]
    fn distance_rejects_mismatch_and_nonfinite() {
        assert!(matches!(
            distance(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            distance(&[f32::NAN, 0.0], &[0.0, 0.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            distance(&[0.0, 0.0], &[f32::INFINITY, 0.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    /// Independent scalar-loop oracle: explicit indexing, same f64
    /// accumulation order, so results must agree to the last bit.
    fn scalar_loop_distance(a: &[f32], b: &[f32]) -> f64 {
        let mut acc = 0.0f64;
        for i in 0..a.len() {
            let d = a[i] as f64 - b[i] as f64;
            acc += d * d;
        }
        acc
    }

    #[test]
    fn distance_matches_scalar_loop_to_zero_ulp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let v: Vec<f32> = (0..32).map(|_| rng.random::<f32>() * 10.0 - 5.0).collect();
            let w: Vec<f32> = (0..32).map(|_| rng.random::<f32>() * 10.0 - 5.0).collect();
            let got = distance(&v, &w).unwrap();
            assert_eq!(got.to_bits(), scalar_loop_distance(&v, &w).to_bits());
            assert_eq!(got.to_bits(), distance(&w, &v).unwrap().to_bits());
        }
    }

    #[test]
    fn knn_single_point() {
        let data = VectorDataset::from_rows("t", vec![vec![1.0, 2.0]]).unwrap();
        let nn = brute_force_knn(&data, &[9.0, 9.0], 1).unwrap();
        assert_eq!(nn.len(), 1);
        assert_eq!(nn[0].id, 0);
    }

    #[test]
    fn knn_self_exclusion() {
        let data = VectorDataset::from_rows(
            "t",
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![5.0, 5.0]],
        )
        .unwrap();
        let nn = knn_of_member(&data, 0, 1).unwrap();
        assert_eq!(nn[0].id, 1);
        // An out-of-sample query placed exactly on point 0 still returns it.
        let nn = brute_force_knn(&data, &[0.0, 0.0], 1).unwrap();
        assert_eq!(nn[0].id, 0);
        assert_eq!(nn[0].dist, 0.0);
    }

    #[test]
    fn knn_rejects_bad_k() {
        let data = VectorDataset::from_rows("t", vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(
            brute_force_knn(&data, &[0.5], 0),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(matches!(
            brute_force_knn(&data, &[0.5], 3),
            Err(Error::KOutOfRange { .. })
        ));
        // by-member k is bounded by n-1 because of self-exclusion
        assert!(matches!(
            knn_of_member(&data, 0, 2),
            Err(Error::KOutOfRange { .. })
        ));
    }

    /// Second independent scan: max-heap of size k over (dist, id), coded
    /// quite differently from the select_nth path.
    fn heap_scan_knn(data: &VectorDataset, q: &[f32], k: usize) -> NeighborList {
        #[derive(PartialEq)]
        struct HeapItem(f64, VertexId);
        impl Eq for HeapItem {}
        impl PartialOrd for HeapItem {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for HeapItem {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
            }
        }
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::new();
        for (id, v) in data.iter().enumerate() {
            let item = HeapItem(squared_euclidean(q, v), id as VertexId);
            if heap.len() < k {
                heap.push(item);
            } else if item < *heap.peek().unwrap() {
                heap.pop();
                heap.push(item);
            }
        }
        let mut out: Vec<Neighbor> = heap
            .into_sorted_vec()
            .into_iter()
            .map(|HeapItem(dist, id)| Neighbor { id, dist })
            .collect();
        out.sort_by(|a, b| a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id)));
        out
    }

    #[test]
    fn knn_matches_heap_scan_oracle() {
        let data = generate_synthetic(SyntheticKind::Uniform, 100, 8, 3, "u").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let q: Vec<f32> = (0..8).map(|_| rng.random::<f32>()).collect();
            let got = brute_force_knn(&data, &q, 10).unwrap();
            let want = heap_scan_knn(&data, &q, 10);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert_eq!(g.id, w.id);
                assert_eq!(g.dist.to_bits(), w.dist.to_bits());
            }
        }
    }

    #[test]
    fn all_member_knn_matches_per_member() {
        let data = generate_synthetic(SyntheticKind::Uniform, 60, 6, 9, "u").unwrap();
        let lists = all_member_knn(&data, 5).unwrap();
        for (id, list) in lists.iter().enumerate() {
            assert_eq!(*list, knn_of_member(&data, id as VertexId, 5).unwrap());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Permuting dataset ids and mapping results back yields the same
        /// neighbor set: the (distance, id) order is total.
        #[test]
        fn knn_permutation_invariant(
            rows in prop::collection::vec(
                prop::collection::vec(-100.0f32..100.0, 3), 5..30),
            q in prop::collection::vec(-100.0f32..100.0, 3),
            k in 1usize..5,
        ) {
            prop_assume!(k <= rows.len());
            let data = VectorDataset::from_rows("a", rows.clone()).unwrap();
            let base = brute_force_knn(&data, &q, k).unwrap();

            // reverse the row order as a fixed nontrivial permutation
            let permuted: Vec<Vec<f32>> = rows.iter().rev().cloned().collect();
            let pdata = VectorDataset::from_rows("b", permuted).unwrap();
            let mapped: Vec<VertexId> = brute_force_knn(&pdata, &q, k)
                .unwrap()
                .iter()
                .map(|nb| (rows.len() - 1 - nb.id as usize) as VertexId)
                .collect();

            let mut base_ids: Vec<VertexId> = base.iter().map(|nb| nb.id).collect();
            let mut mapped_ids = mapped;
            base_ids.sort_unstable();
            mapped_ids.sort_unstable();
            prop_assert_eq!(base_ids, mapped_ids);
        }

        #[test]
        fn fvecs_round_trip(
            rows in prop::collection::vec(
                prop::collection::vec(-1e6f32..1e6, 4), 1..20),
        ) {
            let data = VectorDataset::from_rows("rt", rows).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("x.fvecs");
            save_fvecs(&path, &data).unwrap();
            let back = load_fvecs(&path, "rt").unwrap();
            prop_assert_eq!(back.dim(), data.dim());
            let a: Vec<u32> = data.as_flat().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.as_flat().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn csv_round_trip(
            rows in prop::collection::vec(
                prop::collection::vec(-1e6f32..1e6, 3), 1..10),
        ) {
            let data = VectorDataset::from_rows("rt", rows).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("x.csv");
            save_csv(&path, &data).unwrap();
            let back = load_csv(&path, "rt").unwrap();
            let a: Vec<u32> = data.as_flat().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.as_flat().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn fvecs_single_record_layout() {
        // d=2 then floats 1.0, 2.0, all little-endian
        let bytes: Vec<u8> = [
            2u32.to_le_bytes().to_vec(),
            1.0f32.to_le_bytes().to_vec(),
            2.0f32.to_le_bytes().to_vec(),
        ]
        .concat();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.fvecs");
        std::fs::write(&path, bytes).unwrap();
        let data = load_fvecs(&path, "one").unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data.dim(), 2);
        assert_eq!(data.get(0), &[1.0, 2.0]);
    }

    #[test]
    fn fvecs_truncated_record_names_offset() {
        let mut bytes: Vec<u8> = Vec::new();
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(1.0f32.to_le_bytes());
        bytes.extend(2.0f32.to_le_bytes());
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(3.0f32.to_le_bytes()); // second record cut short
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.fvecs");
        std::fs::write(&path, bytes).unwrap();
        match load_fvecs(&path, "t") {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, 12),
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn fvecs_inconsistent_dim_names_offset() {
        let mut bytes: Vec<u8> = Vec::new();
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(1.0f32.to_le_bytes());
        bytes.extend(2.0f32.to_le_bytes());
        bytes.extend(3u32.to_le_bytes());
        bytes.extend(1.0f32.to_le_bytes());
        bytes.extend(2.0f32.to_le_bytes());
        bytes.extend(3.0f32.to_le_bytes());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mixed.fvecs");
        std::fs::write(&path, bytes).unwrap();
        match load_fvecs(&path, "t") {
            Err(Error::InconsistentDim {
                offset,
                expected,
                got,
                ..
            }) => {
                assert_eq!(offset, 12);
                assert_eq!(expected, 2);
                assert_eq!(got, 3);
            }
            other => panic!("expected InconsistentDim, got {other:?}"),
        }
    }

    #[test]
    fn csv_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        std::fs::write(&path, "1.5,2.5\n3.0,4.0\n").unwrap();
        let data = load_csv(&path, "v").unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.dim(), 2);
        assert_eq!(data.get(0), &[1.5, 2.5]);
        assert_eq!(data.get(1), &[3.0, 4.0]);
    }

    #[test]
    fn csv_bad_value_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1.0,2.0\n1.0,oops\n").unwrap();
        match load_csv(&path, "bad") {
            Err(Error::BadCsvValue { line, value, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(value, "oops");
            }
            other => panic!("expected BadCsvValue, got {other:?}"),
        }
    }

    #[test]
    fn ivecs_round_trip_and_negative_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.ivecs");
        let rows = vec![vec![3u32, 1, 4], vec![1, 5]];
        save_ivecs(&path, &rows).unwrap();
        assert_eq!(load_ivecs(&path).unwrap(), rows);

        let mut bytes: Vec<u8> = Vec::new();
        bytes.extend(1u32.to_le_bytes());
        bytes.extend((-7i32).to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_ivecs(&path), Err(Error::BadRecord { .. })));
    }

    #[test]
    fn uniform_generation_is_deterministic_and_in_range() {
        let a = generate_synthetic(SyntheticKind::Uniform, 10, 4, 7, "u").unwrap();
        let b = generate_synthetic(SyntheticKind::Uniform, 10, 4, 7, "u").unwrap();
        assert_eq!(a, b);
        assert!(a.as_flat().iter().all(|&v| (0.0..1.0).contains(&v)));
        let c = generate_synthetic(SyntheticKind::Uniform, 10, 4, 8, "u").unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_cluster_degenerate_spread_collapses() {
        let data = generate_synthetic(
            SyntheticKind::GaussianClusters {
                clusters: 1,
                sigma: 1e-12,
            },
            50,
            3,
            21,
            "g",
        )
        .unwrap();
        let p0 = data.get(0).to_vec();
        for v in data.iter() {
            assert!(squared_euclidean(&p0, v) < 1e-12);
        }
    }

    #[test]
    fn synthetic_rejects_bad_params() {
        assert!(generate_synthetic(SyntheticKind::Uniform, 0, 4, 1, "x").is_err());
        assert!(generate_synthetic(SyntheticKind::Uniform, 4, 0, 1, "x").is_err());
        assert!(generate_synthetic(
            SyntheticKind::GaussianClusters {
                clusters: 0,
                sigma: 0.1
            },
            4,
            2,
            1,
            "x"
        )
        .is_err());
        assert!(generate_synthetic(
            SyntheticKind::GaussianClusters {
                clusters: 2,
                sigma: 0.0
            },
            4,
            2,
            1,
            "x"
        )
        .is_err());
    }

    #[test]
    fn split_holdout_partitions_rows() {
        let data = generate_synthetic(SyntheticKind::Uniform, 10, 3, 5, "u").unwrap();
        let full = data.clone();
        let (base, queries) = data.split_holdout(3).unwrap();
        assert_eq!(base.len(), 7);
        assert_eq!(queries.len(), 3);
        assert_eq!(base.get(0), full.get(0));
        assert_eq!(queries.get(0), full.get(7));
        assert_eq!(queries.get(2), full.get(9));
    }
}
