//! Python bindings: datasets, graph construction, traced best-first search,
//! and the connectivity diagnostics, with errors surfaced as ValueError /
//! IOError.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use gknn_core::dataset::{self, Neighbor, SyntheticKind, VectorDataset, VectorFormat};
use gknn_core::graph::{self, EdgeStrategy, KnnGraph};
use gknn_core::search::{self, EntryRule, SearchParams};
use gknn_core::{analysis, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. }
        | Error::Truncated { .. }
        | Error::InconsistentDim { .. }
        | Error::BadCsvValue { .. }
        | Error::BadMagic { .. }
        | Error::BadVersion { .. }
        | Error::BadRecord { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_format(path: &str, format: Option<&str>) -> PyResult<VectorFormat> {
    match format {
        Some(f) => f.parse().map_err(err),
        None if path.ends_with(".csv") => Ok(VectorFormat::Csv),
        None => Ok(VectorFormat::Fvecs),
    }
}

/// An in-memory set of fixed-dimension f32 vectors.
#[pyclass]
struct Dataset {
    inner: VectorDataset,
}

#[pymethods]
impl Dataset {
    /// Build from a list of equal-length rows.
    #[new]
    #[pyo3(signature = (rows, name="dataset"))]
    fn new(rows: Vec<Vec<f32>>, name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: VectorDataset::from_rows(name, rows).map_err(err)?,
        })
    }

    /// Uniform random points in the unit cube.
    #[staticmethod]
    #[pyo3(signature = (n, dim, seed, name="uniform"))]
    fn uniform(n: usize, dim: usize, seed: u64, name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: dataset::generate_synthetic(SyntheticKind::Uniform, n, dim, seed, name)
                .map_err(err)?,
        })
    }

    /// Gaussian blobs around uniformly placed centers.
    #[staticmethod]
    #[pyo3(signature = (n, dim, seed, clusters, sigma, name="clusters"))]
    fn clusters(n: usize, dim: usize, seed: u64, clusters: usize, sigma: f64, name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: dataset::generate_synthetic(
                SyntheticKind::GaussianClusters { clusters, sigma },
                n,
                dim,
                seed,
                name,
            )
            .map_err(err)?,
        })
    }

    /// Read vectors from an fvecs or csv file (format inferred from the
    /// extension unless given).
    #[staticmethod]
    #[pyo3(signature = (path, format=None))]
    fn load(path: &str, format: Option<&str>) -> PyResult<Self> {
        let fmt = parse_format(path, format)?;
        Ok(Self {
            inner: dataset::load_vectors(path, fmt, path).map_err(err)?,
        })
    }

    #[pyo3(signature = (path, format=None))]
    fn save(&self, path: &str, format: Option<&str>) -> PyResult<()> {
        let fmt = parse_format(path, format)?;
        dataset::save_vectors(path, fmt, &self.inner).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f32>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!(
                "row {i} out of range for {} rows",
                self.inner.len()
            )));
        }
        Ok(self.inner.get(i).to_vec())
    }

    /// Split off the last `count` rows as a separate query set.
    fn split_holdout(&self, count: usize) -> PyResult<(Dataset, Dataset)> {
        let (base, queries) = self.inner.clone().split_holdout(count).map_err(err)?;
        Ok((Dataset { inner: base }, Dataset { inner: queries }))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, n={}, dim={})",
            self.inner.name(),
            self.inner.len(),
            self.inner.dim()
        )
    }
}

/// A directed nearest-neighbor graph over a dataset's vertices.
#[pyclass]
struct Graph {
    inner: KnnGraph,
}

#[pymethods]
impl Graph {
    /// Exact brute-force construction. `strategy` is one of "directed",
    /// "undirected", "rng", "mrng"; `cap` bounds out-degree after reverse
    /// edges are added.
    #[staticmethod]
    #[pyo3(signature = (data, k, strategy="undirected", cap=None))]
    fn build(data: &Dataset, k: usize, strategy: &str, cap: Option<usize>) -> PyResult<Self> {
        let strategy: EdgeStrategy = strategy.parse().map_err(err)?;
        Ok(Self {
            inner: graph::build_graph(&data.inner, k, strategy, cap).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: graph::load_graph(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        graph::save_graph(path, &self.inner).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn strategy(&self) -> Option<String> {
        self.inner.strategy().map(|s| s.to_string())
    }

    #[getter]
    fn cap(&self) -> Option<usize> {
        self.inner.mod_cap()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn neighbors(&self, v: u32) -> PyResult<Vec<u32>> {
        if (v as usize) >= self.inner.n() {
            return Err(PyValueError::new_err(format!(
                "vertex {v} out of range for {} vertices",
                self.inner.n()
            )));
        }
        Ok(self.inner.neighbors(v).to_vec())
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(n={}, k={}, strategy={:?}, edges={})",
            self.inner.n(),
            self.inner.k(),
            self.inner.strategy().map(|s| s.to_string()),
            self.inner.edge_count()
        )
    }
}

/// Full record of one best-first search.
#[pyclass]
struct Trace {
    inner: search::SearchTrace,
}

#[pymethods]
impl Trace {
    #[getter]
    fn entry(&self) -> u32 {
        self.inner.entry_vertex
    }

    /// Expanded vertices in pop order as (vertex, squared distance).
    #[getter]
    fn pops(&self) -> Vec<(u32, f64)> {
        self.inner.pop_sequence.clone()
    }

    #[getter]
    fn hop_count(&self) -> usize {
        self.inner.hop_count
    }

    /// Result ids, nearest first.
    #[getter]
    fn result(&self) -> Vec<u32> {
        self.inner.result.iter().map(|nb| nb.id).collect()
    }

    #[getter]
    fn result_dists(&self) -> Vec<f64> {
        self.inner.result.iter().map(|nb| nb.dist).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(entry={}, hops={}, result_len={})",
            self.inner.entry_vertex,
            self.inner.hop_count,
            self.inner.result.len()
        )
    }
}

/// Best-first beam search for one query. Entry is a fixed vertex if given,
/// otherwise seeded-random.
#[pyfunction]
#[pyo3(signature = (graph, data, query, k, l, entry=None, seed=0))]
fn search_one(
    graph: &Graph,
    data: &Dataset,
    query: Vec<f32>,
    k: usize,
    l: usize,
    entry: Option<u32>,
    seed: u64,
) -> PyResult<Trace> {
    let params = SearchParams {
        k,
        l,
        entry: match entry {
            Some(v) => EntryRule::Fixed(v),
            None => EntryRule::Random { seed },
        },
    };
    Ok(Trace {
        inner: search::search(&graph.inner, &data.inner, &query, &params).map_err(err)?,
    })
}

/// Search a batch of queries; entry seeds derive from `seed` per query.
#[pyfunction]
#[pyo3(signature = (graph, data, queries, k, l, seed=0))]
fn search_batch(
    graph: &Graph,
    data: &Dataset,
    queries: Vec<Vec<f32>>,
    k: usize,
    l: usize,
    seed: u64,
) -> PyResult<Vec<Trace>> {
    let params = SearchParams {
        k,
        l,
        entry: EntryRule::Random { seed },
    };
    let traces = search::batch_search(&graph.inner, &data.inner, &queries, &params).map_err(err)?;
    Ok(traces.into_iter().map(|inner| Trace { inner }).collect())
}

/// Exact k nearest neighbors as (id, squared distance), nearest first.
#[pyfunction]
fn brute_force_knn(data: &Dataset, query: Vec<f32>, k: usize) -> PyResult<Vec<(u32, f64)>> {
    let hits = dataset::brute_force_knn(&data.inner, &query, k).map_err(err)?;
    Ok(hits.into_iter().map(|nb| (nb.id, nb.dist)).collect())
}

/// Mean local clustering coefficient over all vertices.
#[pyfunction]
fn global_clustering(graph: &Graph) -> f64 {
    analysis::global_clustering(&graph.inner).global
}

/// Clustering coefficient of one vertex.
#[pyfunction]
fn local_clustering(graph: &Graph, v: u32) -> PyResult<f64> {
    if (v as usize) >= graph.inner.n() {
        return Err(PyValueError::new_err(format!(
            "vertex {v} out of range for {} vertices",
            graph.inner.n()
        )));
    }
    Ok(analysis::local_clustering(&graph.inner, v))
}

/// Strongly connected components of the subgraph induced by the query's k
/// true nearest neighbors, largest first.
#[pyfunction]
fn neighborhood_components(
    graph: &Graph,
    data: &Dataset,
    query: Vec<f32>,
    k: usize,
) -> PyResult<Vec<Vec<u32>>> {
    let sub = analysis::neighborhood_subgraph(&graph.inner, &data.inner, &query, k).map_err(err)?;
    Ok(analysis::scc_decompose(&sub).components)
}

/// Fraction of `truth` ids present in `result`.
#[pyfunction]
fn recall(result: Vec<u32>, truth: Vec<u32>) -> PyResult<f64> {
    let as_list = |ids: Vec<u32>| -> Vec<Neighbor> {
        ids.into_iter().map(|id| Neighbor { id, dist: 0.0 }).collect()
    };
    analysis::recall(&as_list(result), &as_list(truth)).map_err(err)
}

#[pymodule]
fn gknn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Graph>()?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(search_one, m)?)?;
    m.add_function(wrap_pyfunction!(search_batch, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_knn, m)?)?;
    m.add_function(wrap_pyfunction!(global_clustering, m)?)?;
    m.add_function(wrap_pyfunction!(local_clustering, m)?)?;
    m.add_function(wrap_pyfunction!(neighborhood_components, m)?)?;
    m.add_function(wrap_pyfunction!(recall, m)?)?;
    Ok(())
}
