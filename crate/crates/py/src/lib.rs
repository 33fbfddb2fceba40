//! Python bindings. Structured results cross the boundary as JSON text.

use std::path::PathBuf;

use pyo3::exceptions::{PyIndexError, PyKeyError, PyValueError};
use pyo3::prelude::*;

use noteflow_core::bundle::{self, to_canonical_json};
use noteflow_core::chart::ChartSpec;
use noteflow_core::classify::{classify_statement, Registry};
use noteflow_core::config::Settings;
use noteflow_core::graph::NodeId;
use noteflow_core::parser;
use noteflow_core::snapshot::{load_manifest, SnapshotStore};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn settings(config: Option<PathBuf>) -> PyResult<Settings> {
    match config {
        Some(p) => Settings::load(&p).map_err(value_err),
        None => Ok(Settings::default()),
    }
}

/// An analyzed notebook.
#[pyclass(name = "Bundle", module = "noteflow")]
struct PyBundle {
    inner: bundle::Bundle,
    path: Option<PathBuf>,
    store: Option<SnapshotStore>,
}

impl PyBundle {
    fn node(&self, raw: &str) -> PyResult<NodeId> {
        let id: NodeId = raw.parse().map_err(value_err)?;
        if !self.inner.graph.contains(&id) {
            return Err(PyKeyError::new_err(format!("unknown node {raw}")));
        }
        Ok(id)
    }
}

#[pymethods]
impl PyBundle {
    #[staticmethod]
    #[pyo3(signature = (notebook, snapshots, trace=None, config=None, embed_data=false))]
    fn analyze(
        notebook: PathBuf,
        snapshots: PathBuf,
        trace: Option<PathBuf>,
        config: Option<PathBuf>,
        embed_data: bool,
    ) -> PyResult<Self> {
        let mut s = settings(config)?;
        s.embed_data |= embed_data;
        let (inner, store) = bundle::analyze(&notebook, trace.as_deref(), &snapshots, &s).map_err(value_err)?;
        Ok(PyBundle { inner, path: None, store: Some(store) })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = bundle::Bundle::load(&path).map_err(value_err)?;
        Ok(PyBundle { inner, path: Some(path), store: None })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = bundle::Bundle::from_json(text).map_err(value_err)?;
        Ok(PyBundle { inner, path: None, store: None })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn nodes(&self) -> Vec<String> {
        self.inner.graph.nodes.iter().map(|n| n.id.to_string()).collect()
    }

    fn layout_columns(&self) -> Vec<Vec<String>> {
        self.inner.graph.layout.columns.iter().map(|c| c.iter().map(ToString::to_string).collect()).collect()
    }

    /// Ranked recommendations of a node as a JSON array.
    #[pyo3(signature = (node, top=None))]
    fn recommend(&self, node: &str, top: Option<usize>) -> PyResult<String> {
        let id = self.node(node)?;
        let mut recs = self.inner.recommendations(&id).unwrap_or_default().to_vec();
        if let Some(k) = top {
            recs.truncate(k);
        }
        Ok(to_canonical_json(&recs))
    }

    /// Pins a chart (rank position or spec JSON) and returns the trace as JSON.
    #[pyo3(signature = (node, chart=None, spec=None, snapshots=None))]
    fn trace(&mut self, node: &str, chart: Option<usize>, spec: Option<&str>, snapshots: Option<PathBuf>) -> PyResult<String> {
        let id = self.node(node)?;
        let spec: ChartSpec = match (chart, spec) {
            (_, Some(json)) => serde_json::from_str(json).map_err(value_err)?,
            (Some(i), None) => {
                let recs = self.inner.recommendations(&id).unwrap_or_default();
                recs.get(i)
                    .map(|r| r.chart.clone())
                    .ok_or_else(|| PyIndexError::new_err(format!("chart index {i} out of range")))?
            }
            (None, None) => return Err(PyValueError::new_err("either chart or spec is required")),
        };
        if let Some(dir) = snapshots {
            self.store = Some(load_manifest(&dir).map_err(value_err)?);
        }
        if self.store.is_none() {
            let dir = self.inner.snapshot_dir(self.path.as_deref());
            self.store = Some(load_manifest(&dir).map_err(value_err)?);
        }
        let store = self.store.as_ref().expect("store loaded");
        let result = self.inner.trace(store, &id, &spec).map_err(value_err)?;
        Ok(to_canonical_json(&result))
    }

    fn __repr__(&self) -> String {
        format!("Bundle(nodes={}, edges={})", self.inner.graph.nodes.len(), self.inner.graph.edges.len())
    }
}

/// Parses one statement into its IR (JSON).
#[pyfunction]
fn parse_statement(raw: &str) -> String {
    to_canonical_json(&parser::parse_statement(raw, 1, 1))
}

/// Primary transformation type of one statement with the bundled registry.
#[pyfunction]
fn classify(raw: &str) -> String {
    classify_statement(&Registry::builtin(), &parser::parse_statement(raw, 1, 1)).primary.name
}

#[pyfunction]
fn pearson(xs: Vec<Option<f64>>, ys: Vec<Option<f64>>) -> PyResult<Option<f64>> {
    if xs.len() != ys.len() {
        return Err(PyValueError::new_err("columns differ in length"));
    }
    Ok(noteflow_core::facts::pearson(&xs, &ys))
}

#[pymodule]
fn noteflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBundle>()?;
    m.add_function(wrap_pyfunction!(parse_statement, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    Ok(())
}
