//! Flow graph of table states, stepped layout and reachability.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{classify_statement, derive_edge_map, ColumnMap, EdgeTransform, Registry};
use crate::ingest::ExecutionTrace;
use crate::parser::{parse_cell, StatementIR};
use crate::snapshot::SnapshotStore;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("malformed node id {0:?}")]
    MalformedNodeId(String),
}

/// `{variable}_C{cell_exec}_L{line_id}`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub variable: String,
    pub cell_exec: u32,
    pub line_id: u32,
}

impl NodeId {
    pub fn new(variable: impl Into<String>, cell_exec: u32, line_id: u32) -> Self {
        NodeId { variable: variable.into(), cell_exec, line_id }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_C{}_L{}", self.variable, self.cell_exec, self.line_id)
    }
}

fn split_number_suffix<'a>(s: &'a str, marker: &str) -> Option<(&'a str, u32)> {
    let at = s.rfind(marker)?;
    let digits = &s[at + marker.len()..];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((&s[..at], digits.parse().ok()?))
}

impl FromStr for NodeId {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || GraphError::MalformedNodeId(s.to_string());
        let (rest, line_id) = split_number_suffix(s, "_L").ok_or_else(err)?;
        let (variable, cell_exec) = split_number_suffix(rest, "_C").ok_or_else(err)?;
        if variable.is_empty() {
            return Err(err());
        }
        Ok(NodeId::new(variable, cell_exec, line_id))
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One parsed statement together with where it ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStatement {
    pub epoch: u32,
    pub cell_pos: u32,
    pub exec_count: u32,
    pub ir: StatementIR,
    pub transform: EdgeTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowNode {
    pub id: NodeId,
    pub epoch: u32,
    pub cell_pos: u32,
    pub has_snapshot: bool,
    pub schema: Vec<String>,
    pub is_display: bool,
    /// Index into [`FlowGraph::statements`].
    pub statement: usize,
    /// Layout column.
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub transform: EdgeTransform,
    pub column_map: ColumnMap,
    pub statement: usize,
    pub epoch: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SteppedLayout {
    pub columns: Vec<Vec<NodeId>>,
    /// (older version, newer version)
    pub version_links: Vec<(NodeId, NodeId)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowGraph {
    pub statements: Vec<FlowStatement>,
    pub nodes: Vec<FlowNode>,
    pub edges: Vec<FlowEdge>,
    pub layout: SteppedLayout,
    pub warnings: Vec<String>,
    #[serde(skip)]
    index: HashMap<NodeId, usize>,
}

impl FlowGraph {
    pub fn node(&self, id: &NodeId) -> Option<&FlowNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    pub fn incoming<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a FlowEdge> + 'a {
        self.edges.iter().filter(move |e| &e.dst == id)
    }

    pub fn outgoing<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a FlowEdge> + 'a {
        self.edges.iter().filter(move |e| &e.src == id)
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
    }

    fn push_node(&mut self, node: FlowNode) -> bool {
        if self.index.contains_key(&node.id) {
            self.warnings.push(format!("duplicate node {} ignored", node.id));
            return false;
        }
        self.index.insert(node.id.clone(), self.nodes.len());
        self.nodes.push(node);
        true
    }

    /// Nodes of one cell execution, in line order.
    pub fn nodes_of_epoch(&self, epoch: u32) -> impl Iterator<Item = &FlowNode> {
        self.nodes.iter().filter(move |n| n.epoch == epoch)
    }
}

/// Parses and classifies every statement of the trace.
pub fn parse_trace(trace: &ExecutionTrace, registry: &Registry) -> Vec<FlowStatement> {
    trace
        .executions
        .iter()
        .flat_map(|exec| {
            parse_cell(&exec.source_lines, exec.epoch).into_iter().map(move |ir| (exec, ir))
        })
        .map(|(exec, ir)| FlowStatement {
            epoch: exec.epoch,
            cell_pos: exec.cell_pos,
            exec_count: exec.exec_count,
            transform: classify_statement(registry, &ir),
            ir,
        })
        .collect()
}

pub fn build_graph(trace: &ExecutionTrace, store: &SnapshotStore, registry: &Registry) -> FlowGraph {
    let mut graph = FlowGraph { statements: parse_trace(trace, registry), ..Default::default() };
    let mut current: HashMap<String, NodeId> = HashMap::new();
    let schema_of = |id: &NodeId| store.get(&id.to_string()).map(|t| t.schema()).unwrap_or_default();

    for si in 0..graph.statements.len() {
        let stmt = &graph.statements[si];
        let (epoch, cell_pos, exec_count, line_id) = (stmt.epoch, stmt.cell_pos, stmt.exec_count, stmt.ir.line_id);
        let inputs: Vec<NodeId> = stmt.ir.reads.iter().filter_map(|r| current.get(r).cloned()).collect();

        let mut outputs: Vec<(NodeId, bool)> = Vec::new();
        if stmt.ir.display_expr {
            if let Some(var) = stmt.ir.reads.iter().find(|r| current.contains_key(*r)) {
                let id = NodeId::new(var.clone(), exec_count, line_id);
                if store.is_tabular(&id.to_string()) {
                    outputs.push((id, true));
                }
            }
        } else {
            for t in &stmt.ir.targets {
                let id = NodeId::new(t.clone(), exec_count, line_id);
                if store.is_tabular(&id.to_string()) {
                    outputs.push((id, false));
                }
            }
        }

        let transform = stmt.transform.clone();
        for (id, is_display) in outputs {
            let key = id.to_string();
            let node = FlowNode {
                id: id.clone(),
                epoch,
                cell_pos,
                has_snapshot: store.get(&key).is_some(),
                schema: schema_of(&id),
                is_display,
                statement: si,
                column: 0,
            };
            if !graph.push_node(node) {
                continue;
            }
            for src in &inputs {
                let (column_map, warnings) = derive_edge_map(
                    &transform,
                    &graph.statements[si].ir.calls,
                    &schema_of(src),
                    &schema_of(&id),
                );
                graph.warnings.extend(warnings.into_iter().map(|w| format!("{src} -> {id}: {w}")));
                graph.edges.push(FlowEdge {
                    src: src.clone(),
                    dst: id.clone(),
                    transform: transform.clone(),
                    column_map,
                    statement: si,
                    epoch,
                });
            }
            if !is_display {
                current.insert(id.variable.clone(), id);
            }
        }
    }
    graph.layout = assign_stepped_layout(&mut graph, trace);
    graph
}

/// Splits executions into layout columns: a new column starts whenever a
/// cell runs whose position is not past every cell already in the column.
pub fn layout_columns(trace: &ExecutionTrace) -> BTreeMap<u32, usize> {
    let mut out = BTreeMap::new();
    let mut column = 0;
    let mut max_pos: Option<u32> = None;
    for exec in &trace.executions {
        if max_pos.is_some_and(|m| exec.cell_pos <= m) {
            column += 1;
            max_pos = None;
        }
        max_pos = Some(max_pos.map_or(exec.cell_pos, |m| m.max(exec.cell_pos)));
        out.insert(exec.epoch, column);
    }
    out
}

pub fn assign_stepped_layout(graph: &mut FlowGraph, trace: &ExecutionTrace) -> SteppedLayout {
    let columns_of = layout_columns(trace);
    let count = columns_of.values().max().map_or(0, |m| m + 1);
    let mut columns: Vec<Vec<NodeId>> = vec![Vec::new(); count];
    for node in &mut graph.nodes {
        node.column = columns_of.get(&node.epoch).copied().unwrap_or(0);
        if let Some(col) = columns.get_mut(node.column) {
            col.push(node.id.clone());
        }
    }
    let mut version_links = Vec::new();
    for k in 1..columns.len() {
        let mut seen = BTreeSet::new();
        for id in &columns[k] {
            let node = graph.node(id).expect("layout node exists");
            if node.is_display || !seen.insert(id.variable.clone()) {
                continue;
            }
            let previous = columns[k - 1]
                .iter()
                .rev()
                .find(|p| p.variable == id.variable && graph.node(p).is_some_and(|n| !n.is_display));
            if let Some(p) = previous {
                version_links.push((p.clone(), id.clone()));
            }
        }
    }
    SteppedLayout { columns, version_links }
}

fn reach(graph: &FlowGraph, start: &NodeId, forward: bool, version_links: bool) -> BTreeSet<NodeId> {
    let links = graph.edges.iter().map(|e| (&e.src, &e.dst));
    let versions = graph.layout.version_links.iter().filter(|_| version_links).map(|(a, b)| (a, b));
    let mut adjacency: HashMap<&NodeId, Vec<&NodeId>> = HashMap::new();
    for (a, b) in links.chain(versions) {
        let (from, to) = if forward { (a, b) } else { (b, a) };
        adjacency.entry(from).or_default().push(to);
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        if !seen.insert(n.clone()) {
            continue;
        }
        for next in adjacency.get(n).into_iter().flatten() {
            queue.push_back(next);
        }
    }
    seen
}

pub fn ancestors(graph: &FlowGraph, node: &NodeId) -> BTreeSet<NodeId> {
    reach(graph, node, false, false)
}

pub fn descendants(graph: &FlowGraph, node: &NodeId) -> BTreeSet<NodeId> {
    reach(graph, node, true, false)
}

/// Ancestors ∪ descendants, including `node` itself.
pub fn related_subgraph(graph: &FlowGraph, node: &NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
    related_with_links(graph, node, false)
}

/// Like [`related_subgraph`], optionally following version links as edges.
pub fn related_with_links(
    graph: &FlowGraph,
    node: &NodeId,
    version_links: bool,
) -> Result<BTreeSet<NodeId>, GraphError> {
    if !graph.contains(node) {
        return Err(GraphError::UnknownNode(node.to_string()));
    }
    let mut out = reach(graph, node, false, version_links);
    out.extend(reach(graph, node, true, version_links));
    Ok(out)
}

/// True when the edges among `nodes` contain a cycle.
pub fn has_cycle(graph: &FlowGraph, nodes: &[NodeId]) -> bool {
    let members: BTreeSet<&NodeId> = nodes.iter().collect();
    let mut indegree: BTreeMap<&NodeId, usize> = members.iter().map(|n| (*n, 0)).collect();
    let inner: Vec<&FlowEdge> = graph
        .edges
        .iter()
        .filter(|e| members.contains(&e.src) && members.contains(&e.dst))
        .collect();
    for e in &inner {
        *indegree.entry(&e.dst).or_default() += 1;
    }
    let mut queue: VecDeque<&NodeId> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut visited = 0;
    while let Some(n) = queue.pop_front() {
        visited += 1;
        for e in inner.iter().filter(|e| &e.src == n) {
            let d = indegree.get_mut(&e.dst).expect("member");
            *d -= 1;
            if *d == 0 {
                queue.push_back(&e.dst);
            }
        }
    }
    visited != members.len()
}
