//! Python bindings for the `maskgae` crate.

use std::path::PathBuf;

use maskgae::analysis;
use maskgae::evaluation::{self, NodeSplit, ProbeConfig};
use maskgae::graph::{self, Edge};
use maskgae::masking::MaskingStrategy;
use maskgae::models::{self, DecoderMode, EncoderConfig, ModelParams};
use maskgae::numcore::{self, DenseMatrix};
use maskgae::trainer::{self, TrainConfig, Validation};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: maskgae::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn matrix(rows: Vec<Vec<f32>>) -> PyResult<DenseMatrix<f32>> {
    DenseMatrix::from_rows(&rows).map_err(to_py)
}

fn nested(m: &DenseMatrix<f32>) -> Vec<Vec<f32>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Undirected graph with optional node features and labels.
#[pyclass(name = "Graph", module = "maskgae_py", frozen)]
struct PyGraph {
    inner: graph::Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (n_nodes, edges, features=None, labels=None))]
    fn new(
        n_nodes: usize,
        edges: Vec<Edge>,
        features: Option<Vec<Vec<f32>>>,
        labels: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let mut g = graph::Graph::from_edges(n_nodes, edges).map_err(to_py)?;
        if let Some(f) = features {
            g = g.with_features(matrix(f)?).map_err(to_py)?;
        }
        if let Some(l) = labels {
            g = g.with_labels(l).map_err(to_py)?;
        }
        Ok(Self { inner: g })
    }

    /// Loads the plain-text edge list, feature and label files.
    #[staticmethod]
    #[pyo3(signature = (edges, features=None, labels=None))]
    fn load(edges: PathBuf, features: Option<PathBuf>, labels: Option<PathBuf>) -> PyResult<Self> {
        let inner = graph::load_graph(&edges, features.as_deref(), labels.as_deref()).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    #[getter]
    fn edges(&self) -> Vec<Edge> {
        self.inner.edges().to_vec()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<usize>> {
        self.inner.labels().map(<[usize]>::to_vec)
    }

    #[getter]
    fn features(&self) -> Option<Vec<Vec<f32>>> {
        self.inner.features().map(nested)
    }

    fn degree(&self, v: usize) -> PyResult<usize> {
        self.inner.check_node(v).map_err(to_py)?;
        Ok(self.inner.degree(v))
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.inner.n_nodes() && v < self.inner.n_nodes() && self.inner.has_edge(u, v)
    }

    fn __repr__(&self) -> String {
        format!("Graph(n_nodes={}, n_edges={})", self.inner.n_nodes(), self.inner.n_edges())
    }
}

/// Train/validation/test partition of a graph's edges.
#[pyclass(name = "EdgeSplit", module = "maskgae_py", frozen)]
struct PyEdgeSplit {
    inner: graph::EdgeSplit,
}

#[pymethods]
impl PyEdgeSplit {
    #[getter]
    fn train_graph(&self) -> PyGraph {
        PyGraph {
            inner: self.inner.train_graph.clone(),
        }
    }

    #[getter]
    fn val_pos(&self) -> Vec<Edge> {
        self.inner.val_pos.clone()
    }

    #[getter]
    fn val_neg(&self) -> Vec<Edge> {
        self.inner.val_neg.clone()
    }

    #[getter]
    fn test_pos(&self) -> Vec<Edge> {
        self.inner.test_pos.clone()
    }

    #[getter]
    fn test_neg(&self) -> Vec<Edge> {
        self.inner.test_neg.clone()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    #[pyo3(signature = (text, dataset=None))]
    fn from_json(text: &str, dataset: Option<&PyGraph>) -> PyResult<Self> {
        let inner = graph::EdgeSplit::from_json(text, dataset.map(|g| &g.inner)).map_err(to_py)?;
        Ok(Self { inner })
    }
}

#[pyfunction]
#[pyo3(signature = (graph, val_frac=0.05, test_frac=0.10, seed=0))]
fn split_edges(graph: &PyGraph, val_frac: f64, test_frac: f64, seed: u64) -> PyResult<PyEdgeSplit> {
    let inner = graph::split_edges(&graph.inner, val_frac, test_frac, seed).map_err(to_py)?;
    Ok(PyEdgeSplit { inner })
}

fn strategy(name: &str, p: f64, root_fraction: f64, n_walk: usize, l_walk: usize) -> PyResult<MaskingStrategy> {
    let s = match name {
        "edge" => MaskingStrategy::Edge { p },
        "path" => MaskingStrategy::Path {
            root_fraction,
            n_walk,
            l_walk,
        },
        _ => return Err(PyValueError::new_err(format!("strategy must be 'edge' or 'path', got {name:?}"))),
    };
    s.validate().map_err(to_py)?;
    Ok(s)
}

/// Masks edges; returns `(masked, visible)` edge lists.
#[pyfunction]
#[pyo3(signature = (graph, strategy="path", p=0.7, root_fraction=0.5, n_walk=2, l_walk=4, seed=0))]
fn mask_edges(
    graph: &PyGraph,
    strategy: &str,
    p: f64,
    root_fraction: f64,
    n_walk: usize,
    l_walk: usize,
    seed: u64,
) -> PyResult<(Vec<Edge>, Vec<Edge>)> {
    let s = self::strategy(strategy, p, root_fraction, n_walk, l_walk)?;
    let m = s.apply(&graph.inner, seed).map_err(to_py)?;
    Ok((m.masked_edges, m.visible_edges))
}

/// Encoder and decoder parameters.
#[pyclass(name = "Model", module = "maskgae_py", frozen)]
struct PyModel {
    inner: ModelParams,
}

#[pymethods]
impl PyModel {
    /// Freshly initialized parameters.
    #[new]
    #[pyo3(signature = (in_dim, n_layers=3, hidden_dim=64, batchnorm=true, decoder="mlp", seed=0))]
    fn new(in_dim: usize, n_layers: usize, hidden_dim: usize, batchnorm: bool, decoder: &str, seed: u64) -> PyResult<Self> {
        let config = models::ModelConfig {
            in_dim,
            encoder: EncoderConfig {
                n_layers,
                hidden_dim,
                use_batchnorm: batchnorm,
                dropout: 0.0,
            },
            decoder: decoder.parse::<DecoderMode>().map_err(to_py)?,
        };
        let inner = models::init_params(config, seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let tensors = numcore::read_checkpoint(&path).map_err(to_py)?;
        let inner = ModelParams::from_named(&tensors).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        numcore::write_checkpoint(&path, &self.inner.to_named()).map_err(to_py)
    }

    /// Hex SHA-256 of the serialized parameters.
    fn digest(&self) -> String {
        numcore::checkpoint_digest(&self.inner.to_named())
    }

    #[getter]
    fn n_parameters(&self) -> usize {
        self.inner.n_scalars()
    }

    /// Final-layer embeddings on the full graph.
    fn encode(&self, graph: &PyGraph) -> PyResult<Vec<Vec<f32>>> {
        let x = features(graph)?;
        let adj = std::sync::Arc::new(graph::normalized_adjacency(&graph.inner, true));
        let (z, _) = models::encode(&self.inner, x, &adj).map_err(to_py)?;
        Ok(nested(&z))
    }

    /// Structure-decoder logits for `edges`.
    fn score(&self, graph: &PyGraph, edges: Vec<Edge>) -> PyResult<Vec<f32>> {
        let x = features(graph)?;
        let adj = std::sync::Arc::new(graph::normalized_adjacency(&graph.inner, true));
        let (z, _) = models::encode(&self.inner, x, &adj).map_err(to_py)?;
        models::decode_structure(&self.inner, &z, &edges).map_err(to_py)
    }

    /// Concatenated outputs of every encoder layer, as used by the probe.
    fn probe_embeddings(&self, graph: &PyGraph) -> PyResult<Vec<Vec<f32>>> {
        let emb = evaluation::build_probe_embeddings(&self.inner, &graph.inner, features(graph)?).map_err(to_py)?;
        Ok(nested(&emb))
    }
}

fn features(g: &PyGraph) -> PyResult<&DenseMatrix<f32>> {
    g.inner
        .features()
        .ok_or_else(|| PyValueError::new_err("graph has no node features"))
}

/// Pretrains a model; returns `(model, history)` where history holds one
/// dict per epoch.
#[pyfunction]
#[pyo3(signature = (
    graph, val_pos=None, val_neg=None, strategy="path", p=0.7, root_fraction=0.5,
    n_walk=2, l_walk=4, alpha=2e-3, lr=0.01, epochs=500, patience=50, n_layers=3,
    hidden_dim=64, batchnorm=true, dropout=0.0, decoder="mlp", seed=0
))]
#[allow(clippy::too_many_arguments)]
fn pretrain<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    val_pos: Option<Vec<Edge>>,
    val_neg: Option<Vec<Edge>>,
    strategy: &str,
    p: f64,
    root_fraction: f64,
    n_walk: usize,
    l_walk: usize,
    alpha: f64,
    lr: f64,
    epochs: usize,
    patience: usize,
    n_layers: usize,
    hidden_dim: usize,
    batchnorm: bool,
    dropout: f64,
    decoder: &str,
    seed: u64,
) -> PyResult<(PyModel, Vec<Bound<'py, PyDict>>)> {
    let config = TrainConfig {
        strategy: self::strategy(strategy, p, root_fraction, n_walk, l_walk)?,
        alpha,
        lr,
        max_epochs: epochs,
        patience,
        encoder: EncoderConfig {
            n_layers,
            hidden_dim,
            use_batchnorm: batchnorm,
            dropout,
        },
        decoder: decoder.parse::<DecoderMode>().map_err(to_py)?,
        seed,
    };
    let x = features(graph)?;
    let (pos, neg) = (val_pos.unwrap_or_default(), val_neg.unwrap_or_default());
    let validation = (!pos.is_empty()).then_some(Validation { pos: &pos, neg: &neg });
    let (params, state) = py
        .detach(|| trainer::pretrain(&graph.inner, x, validation, &config))
        .map_err(to_py)?;
    let history = state
        .history
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("epoch", r.epoch)?;
            d.set_item("loss", r.loss)?;
            d.set_item("gae", r.gae)?;
            d.set_item("deg", r.deg)?;
            d.set_item("val_auc", r.val_auc)?;
            d.set_item("masked", r.n_masked)?;
            Ok(d)
        })
        .collect::<PyResult<_>>()?;
    Ok((PyModel { inner: params }, history))
}

/// `{"auc": .., "ap": ..}` on candidate edges, encoding `graph`.
#[pyfunction]
fn eval_link_prediction(model: &PyModel, graph: &PyGraph, pos: Vec<Edge>, neg: Vec<Edge>) -> PyResult<(f64, f64)> {
    let r = evaluation::eval_link_prediction(&model.inner, &graph.inner, features(graph)?, &pos, &neg)
        .map_err(to_py)?;
    Ok((r.metrics["auc"], r.metrics["ap"]))
}

/// Linear-probe accuracies `{"train_acc", "val_acc", "test_acc", ...}`.
#[pyfunction]
#[pyo3(signature = (model, graph, train, val, test, epochs=300, lr=0.01, weight_decay=1e-5, standardize=false, seed=0))]
#[allow(clippy::too_many_arguments)]
fn linear_probe<'py>(
    py: Python<'py>,
    model: &PyModel,
    graph: &PyGraph,
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
    epochs: usize,
    lr: f64,
    weight_decay: f64,
    standardize: bool,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let labels = graph
        .inner
        .labels()
        .ok_or_else(|| PyValueError::new_err("graph has no labels"))?;
    let emb = evaluation::build_probe_embeddings(&model.inner, &graph.inner, features(graph)?).map_err(to_py)?;
    let config = ProbeConfig {
        lr,
        epochs,
        weight_decay,
        standardize,
        split: NodeSplit { train, val, test },
    };
    let r = py
        .detach(|| evaluation::linear_probe(&emb, labels, &config, seed))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    for (k, v) in &r.metrics {
        d.set_item(k, v)?;
    }
    Ok(d)
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    evaluation::auc(&scores, &labels).map_err(to_py)
}

#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    evaluation::average_precision(&scores, &labels).map_err(to_py)
}

/// Mean node and edge overlap `(o_node, o_edge)` of the k-hop neighbourhoods
/// of each pair in `edges` (default: every edge of the graph).
#[pyfunction]
#[pyo3(signature = (graph, k=2, edges=None))]
fn overlap_stats(graph: &PyGraph, k: usize, edges: Option<Vec<Edge>>) -> PyResult<(f64, f64)> {
    let edges = edges.unwrap_or_else(|| graph.inner.edges().to_vec());
    let r = analysis::overlap_stats(&graph.inner, &edges, k).map_err(to_py)?;
    Ok((r.o_node, r.o_edge))
}

#[pymodule]
fn maskgae_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyEdgeSplit>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(split_edges, m)?)?;
    m.add_function(wrap_pyfunction!(mask_edges, m)?)?;
    m.add_function(wrap_pyfunction!(pretrain, m)?)?;
    m.add_function(wrap_pyfunction!(eval_link_prediction, m)?)?;
    m.add_function(wrap_pyfunction!(linear_probe, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(overlap_stats, m)?)?;
    Ok(())
}
