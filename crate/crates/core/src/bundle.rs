//! The analysis bundle: everything the CLI and UI consume, serialized
//! canonically so equal inputs give equal bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{render_data, ChartData, ChartSpec};
use crate::classify::{Registry, RegistryError};
use crate::config::Settings;
use crate::facts::{mine_facts, DataFact};
use crate::graph::{build_graph, FlowGraph, NodeId};
use crate::ingest::{build_trace, load_notebook, load_trace_log, ExecutionTrace, IngestError};
use crate::recommend::{recommend_node, Recommendation};
use crate::snapshot::{load_manifest, profile, ColumnProfile, SnapshotError, SnapshotStore};
use crate::trace::{trace, TraceError, TraceResult};

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("malformed bundle: {0}")]
    Malformed(String),
    #[error("unsupported bundle version {0}")]
    Version(u32),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One executed cell as recorded in the bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionSummary {
    pub epoch: u32,
    pub cell_pos: u32,
    pub exec_count: u32,
    pub lines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub notebook: String,
    pub executions: Vec<ExecutionSummary>,
}

impl TraceSummary {
    pub fn of(trace: &ExecutionTrace) -> Self {
        TraceSummary {
            notebook: trace.notebook_path.clone(),
            executions: trace
                .executions
                .iter()
                .map(|e| ExecutionSummary {
                    epoch: e.epoch,
                    cell_pos: e.cell_pos,
                    exec_count: e.exec_count,
                    lines: e.source_lines.len(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAnalysis {
    pub rows: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub sampled: bool,
    pub profiles: Vec<ColumnProfile>,
    pub facts: Vec<DataFact>,
    /// Ranked; position is the rank.
    pub recommendations: Vec<Recommendation>,
    /// Rendered data per recommendation, when embedded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_data: Option<Vec<ChartData>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub version: u32,
    /// Snapshot directory as given to the analyzer.
    pub snapshots: String,
    pub trace: TraceSummary,
    pub graph: FlowGraph,
    pub nodes: BTreeMap<NodeId, NodeAnalysis>,
    pub settings: Settings,
    pub warnings: Vec<String>,
}

/// Full pipeline over an already loaded trace and store.
pub fn analyze_loaded(
    trace: &ExecutionTrace,
    store: &SnapshotStore,
    registry: &Registry,
    settings: &Settings,
    snapshots_label: &str,
) -> Bundle {
    let graph = build_graph(trace, store, registry);
    let mut nodes = BTreeMap::new();
    for n in &graph.nodes {
        let Some(table) = store.get(&n.id.to_string()) else { continue };
        let profiles = profile(table, settings);
        let facts = mine_facts(table, &profiles, &n.id.to_string(), settings);
        let recommendations = recommend_node(&graph, &n.id, &profiles, &facts, table.sampled, settings);
        let chart_data = settings.embed_data.then(|| {
            recommendations
                .iter()
                .map(|r| render_data(&r.chart, table, settings).unwrap_or_default())
                .collect()
        });
        nodes.insert(
            n.id.clone(),
            NodeAnalysis {
                rows: table.total_rows,
                sampled: table.sampled,
                profiles,
                facts,
                recommendations,
                chart_data,
            },
        );
    }
    let mut warnings = store.warnings.clone();
    warnings.extend(store.dropped.iter().map(|id| format!("snapshot {id} dropped")));
    warnings.extend(graph.warnings.iter().cloned());
    Bundle {
        version: BUNDLE_VERSION,
        snapshots: snapshots_label.to_string(),
        trace: TraceSummary::of(trace),
        graph,
        nodes,
        settings: settings.clone(),
        warnings,
    }
}

pub fn load_registry(settings: &Settings) -> Result<Registry, RegistryError> {
    match &settings.registry {
        Some(path) => Registry::load(path),
        None => Ok(Registry::builtin()),
    }
}

/// Reads the notebook, optional execution log, and snapshots, then analyzes.
pub fn analyze(
    notebook: &Path,
    trace_log: Option<&Path>,
    snapshots: &Path,
    settings: &Settings,
) -> Result<(Bundle, SnapshotStore), AnalyzeError> {
    let registry = load_registry(settings)?;
    let cells = load_notebook(notebook)?;
    let log = trace_log.map(load_trace_log).transpose()?;
    let trace = build_trace(&notebook.display().to_string(), &cells, log.as_deref())?;
    let store = load_manifest(snapshots)?;
    let bundle = analyze_loaded(&trace, &store, &registry, settings, &snapshots.display().to_string());
    Ok((bundle, store))
}

/// Serializes with sorted keys and shortest round-trip floats.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    // Value maps are ordered by key, which sorts every object
    let v = serde_json::to_value(value).expect("serializable");
    serde_json::to_string(&v).expect("serializable")
}

impl Bundle {
    pub fn to_json(&self) -> String {
        to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, BundleError> {
        let mut b: Bundle = serde_json::from_str(text).map_err(|e| BundleError::Malformed(e.to_string()))?;
        if b.version != BUNDLE_VERSION {
            return Err(BundleError::Version(b.version));
        }
        b.graph.reindex();
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self, BundleError> {
        let text = std::fs::read_to_string(path).map_err(|source| BundleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Snapshot directory, tried as given and then next to the bundle file.
    pub fn snapshot_dir(&self, bundle_path: Option<&Path>) -> PathBuf {
        let given = PathBuf::from(&self.snapshots);
        if given.is_absolute() || given.join("manifest.json").exists() {
            return given;
        }
        match bundle_path.and_then(Path::parent) {
            Some(dir) if dir.join(&given).join("manifest.json").exists() => dir.join(given),
            _ => given,
        }
    }

    /// Ranked charts of a node.
    pub fn recommendations(&self, node: &NodeId) -> Option<&[Recommendation]> {
        self.nodes.get(node).map(|n| n.recommendations.as_slice())
    }

    /// Traces a chart; needs the snapshot data.
    pub fn trace(&self, store: &SnapshotStore, node: &NodeId, spec: &ChartSpec) -> Result<TraceResult, TraceError> {
        trace(&self.graph, store, node, spec, &self.settings)
    }
}
