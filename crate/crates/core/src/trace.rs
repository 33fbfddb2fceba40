//! Consistent chart tracing: a pinned chart is carried along the flow with
//! column substitution, then rendered and compared at every related node.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{render_data, ChartData, ChartError, ChartSpec, Encoding};
use crate::classify::ColumnMap;
use crate::config::Settings;
use crate::graph::{related_with_links, FlowGraph, GraphError, NodeId};
use crate::snapshot::SnapshotStore;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("pinned node {node}: {source}")]
    Pinned { node: String, source: ChartError },
    #[error("pinned node {0} has no snapshot")]
    NoSnapshot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStatus {
    Renderable,
    Substituted,
    Untraceable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChangeFlag {
    Changed,
    Similar,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Backward,
    Forward,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRef {
    pub src: NodeId,
    pub dst: NodeId,
}

/// One column replacement. `to: None` means the channel was dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub from: String,
    pub to: Option<String>,
    pub edge: EdgeRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ChartSpec>,
    pub status: TraceStatus,
    pub change: ChangeFlag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<ChartData>,
    pub substitutions: Vec<Substitution>,
    /// Why the node is untraceable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Flow predecessor the change flag compares against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predecessor: Option<NodeId>,
    /// Edge count from the pinned node along the traced path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<usize>,
    pub color: String,
}

impl TraceEntry {
    pub fn is_traceable(&self) -> bool {
        self.status != TraceStatus::Untraceable
    }

    fn untraceable(reason: &str) -> Self {
        TraceEntry {
            spec: None,
            status: TraceStatus::Untraceable,
            change: ChangeFlag::NotApplicable,
            data: None,
            substitutions: Vec::new(),
            reason: Some(reason.to_string()),
            predecessor: None,
            distance: None,
            color: String::new(),
        }
    }
}

/// Node fill in the flow view.
pub fn node_color(status: TraceStatus, change: ChangeFlag) -> &'static str {
    match (status, change) {
        (TraceStatus::Untraceable, _) => "red",
        (_, ChangeFlag::Similar) => "lightblue",
        _ => "blue",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLink {
    pub src: NodeId,
    pub dst: NodeId,
    /// black when both ends are traced, grey otherwise.
    pub color: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub version_link: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub pinned: (NodeId, ChartSpec),
    pub per_node: BTreeMap<NodeId, TraceEntry>,
    pub links: Vec<TraceLink>,
}

impl TraceResult {
    /// Traced nodes flagged Changed, in flow order.
    pub fn changed_in_flow_order(&self, graph: &FlowGraph) -> Vec<NodeId> {
        let mut out: Vec<(u32, u32, NodeId)> = self
            .per_node
            .iter()
            .filter(|(_, e)| e.change == ChangeFlag::Changed)
            .map(|(id, _)| (graph.node(id).map_or(0, |n| n.epoch), id.line_id, id.clone()))
            .collect();
        out.sort();
        out.into_iter().map(|(_, _, id)| id).collect()
    }
}

/// Outcome of mapping one spec across one edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Substituted {
    Ok { spec: ChartSpec, changes: Vec<(String, Option<String>)> },
    Failed { field: String },
}

/// Maps every encoded field across `map` in `direction`. Positional fields
/// without a counterpart fail; a color field without one is dropped.
pub fn substitute_encoding(spec: &ChartSpec, map: &ColumnMap, schema_changing: bool, direction: Direction) -> Substituted {
    if !schema_changing {
        return Substituted::Ok { spec: spec.clone(), changes: Vec::new() };
    }
    let mapped = |field: &str| -> Option<String> {
        let found = match direction {
            Direction::Backward => map.sources_of(field).next(),
            Direction::Forward => map.images_of(field).next(),
        };
        found.map(str::to_string)
    };
    let mut out = spec.clone();
    let mut changes = Vec::new();
    for enc in [&mut out.x, &mut out.y] {
        let Some(field) = enc.field.clone() else { continue };
        match mapped(&field) {
            Some(to) if to == field => {}
            Some(to) => {
                changes.push((field, Some(to.clone())));
                enc.field = Some(to);
            }
            None => return Substituted::Failed { field },
        }
    }
    if let Some(field) = out.color.as_ref().and_then(|c| c.field.clone()) {
        match mapped(&field) {
            Some(to) if to == field => {}
            Some(to) if !out.encodes(&to) => {
                changes.push((field, Some(to.clone())));
                out.color = Some(Encoding { field: Some(to), ..out.color.clone().expect("color") });
            }
            _ => {
                changes.push((field, None));
                out.color = None;
            }
        }
    }
    if out.validate().is_err() {
        return Substituted::Failed { field: out.x.name().to_string() };
    }
    Substituted::Ok { spec: out, changes }
}

/// A traversal step: a flow edge or a version link (identity).
struct Step<'a> {
    src: &'a NodeId,
    dst: &'a NodeId,
    map: Option<&'a ColumnMap>,
    schema_changing: bool,
    epoch: u32,
    line: u32,
}

fn steps<'a>(graph: &'a FlowGraph, related: &BTreeSet<NodeId>) -> Vec<Step<'a>> {
    let mut out: Vec<Step<'a>> = graph
        .edges
        .iter()
        .filter(|e| related.contains(&e.src) && related.contains(&e.dst))
        .map(|e| Step {
            src: &e.src,
            dst: &e.dst,
            map: Some(&e.column_map),
            schema_changing: e.transform.schema_changing,
            epoch: e.epoch,
            line: graph.statements.get(e.statement).map_or(0, |s| s.ir.line_id),
        })
        .collect();
    for (a, b) in &graph.layout.version_links {
        if related.contains(a) && related.contains(b) {
            out.push(Step {
                src: a,
                dst: b,
                map: None,
                schema_changing: false,
                epoch: graph.node(b).map_or(0, |n| n.epoch),
                line: 0,
            });
        }
    }
    out
}

struct Reached {
    spec: ChartSpec,
    subs: Vec<Substitution>,
    distance: usize,
}

/// Traces `spec` pinned at `pinned` over the related subgraph (version links
/// count as identity edges).
pub fn trace(
    graph: &FlowGraph,
    store: &SnapshotStore,
    pinned: &NodeId,
    spec: &ChartSpec,
    settings: &Settings,
) -> Result<TraceResult, TraceError> {
    let related = related_with_links(graph, pinned, true)?;
    let snap = store.get(&pinned.to_string()).ok_or_else(|| TraceError::NoSnapshot(pinned.to_string()))?;
    let pinned_data =
        render_data(spec, snap, settings).map_err(|source| TraceError::Pinned { node: pinned.to_string(), source })?;
    spec.validate().map_err(|source| TraceError::Pinned { node: pinned.to_string(), source })?;
    let all_steps = steps(graph, &related);

    // Shortest successful paths, expanded level by level; only traceable
    // nodes propagate. Ties go to the smallest (epoch, line, node).
    let mut reached: BTreeMap<NodeId, Reached> = BTreeMap::new();
    let mut failures: BTreeMap<NodeId, String> = BTreeMap::new();
    let mut data: BTreeMap<NodeId, ChartData> = BTreeMap::new();
    reached.insert(pinned.clone(), Reached { spec: spec.clone(), subs: Vec::new(), distance: 0 });
    data.insert(pinned.clone(), pinned_data);
    // the pinned node is both an ancestor and a descendant root
    let mut frontier: Vec<(NodeId, Option<Direction>)> = vec![(pinned.clone(), None)];
    let mut distance = 0;
    while !frontier.is_empty() {
        distance += 1;
        let mut offers: BTreeMap<NodeId, Vec<(u32, u32, NodeId, Direction, &Step)>> = BTreeMap::new();
        for (node, dir) in &frontier {
            for s in &all_steps {
                let (next, d) = if s.dst == node && dir != &Some(Direction::Forward) {
                    (s.src, Direction::Backward)
                } else if s.src == node && dir != &Some(Direction::Backward) {
                    (s.dst, Direction::Forward)
                } else {
                    continue;
                };
                if reached.contains_key(next) {
                    continue;
                }
                offers.entry(next.clone()).or_default().push((s.epoch, s.line, node.clone(), d, s));
            }
        }
        let mut next_frontier = Vec::new();
        for (next, mut cands) in offers {
            cands.sort_by(|a, b| (a.0, a.1, &a.2).cmp(&(b.0, b.1, &b.2)));
            let mut fail = None;
            for (_, _, from, d, s) in cands {
                let base = &reached[&from];
                let result = match s.map {
                    Some(map) => substitute_encoding(&base.spec, map, s.schema_changing, d),
                    None => Substituted::Ok { spec: base.spec.clone(), changes: Vec::new() },
                };
                let (new_spec, changes) = match result {
                    Substituted::Ok { spec, changes } => (spec, changes),
                    Substituted::Failed { field } => {
                        fail.get_or_insert(format!("unmapped-column:{field}"));
                        continue;
                    }
                };
                let Some(table) = store.get(&next.to_string()) else {
                    fail.get_or_insert("no-snapshot".to_string());
                    continue;
                };
                let rendered = match render_data(&new_spec, table, settings) {
                    Ok(r) => r,
                    Err(_) => {
                        fail.get_or_insert("missing-column".to_string());
                        continue;
                    }
                };
                let edge = EdgeRef { src: s.src.clone(), dst: s.dst.clone() };
                let mut subs = base.subs.clone();
                subs.extend(changes.into_iter().map(|(from, to)| Substitution { from, to, edge: edge.clone() }));
                data.insert(next.clone(), rendered);
                reached.insert(next.clone(), Reached { spec: new_spec, subs, distance });
                next_frontier.push((next.clone(), Some(d)));
                fail = None;
                break;
            }
            if let Some(reason) = fail {
                failures.entry(next).or_insert(reason);
            }
        }
        frontier = next_frontier;
    }

    let mut per_node = BTreeMap::new();
    for id in &related {
        let Some(r) = reached.get(id) else {
            let reason = failures.get(id).map_or("blocked", String::as_str);
            per_node.insert(id.clone(), TraceEntry::untraceable(reason));
            continue;
        };
        // flow predecessor: the closest related in-neighbor
        let pred = all_steps
            .iter()
            .filter(|s| s.dst == id)
            .map(|s| {
                let d = reached.get(s.src).map_or(usize::MAX, |x| x.distance);
                (d, s.epoch, s.line, s.src)
            })
            .min();
        let change = match pred {
            Some((_, _, _, p)) => match (reached.get(p), data.get(p)) {
                (Some(pr), Some(pd)) => {
                    if pr.spec != r.spec || pd.differs(&data[id], settings.rel_tolerance, settings.abs_tolerance) {
                        ChangeFlag::Changed
                    } else {
                        ChangeFlag::Similar
                    }
                }
                _ => ChangeFlag::NotApplicable,
            },
            None => ChangeFlag::NotApplicable,
        };
        let status = if r.subs.is_empty() { TraceStatus::Renderable } else { TraceStatus::Substituted };
        per_node.insert(
            id.clone(),
            TraceEntry {
                spec: Some(r.spec.clone()),
                status,
                change,
                data: data.get(id).cloned(),
                substitutions: r.subs.clone(),
                reason: None,
                predecessor: pred.map(|p| p.3.clone()),
                distance: Some(r.distance),
                color: String::new(),
            },
        );
    }
    for e in per_node.values_mut() {
        e.color = node_color(e.status, e.change).to_string();
    }

    let traced = |n: &NodeId| per_node.get(n).is_some_and(TraceEntry::is_traceable);
    let mut links: Vec<TraceLink> = graph
        .edges
        .iter()
        .map(|e| (&e.src, &e.dst, false))
        .chain(graph.layout.version_links.iter().map(|(a, b)| (a, b, true)))
        .map(|(src, dst, version_link)| TraceLink {
            src: src.clone(),
            dst: dst.clone(),
            color: if traced(src) && traced(dst) { "black" } else { "grey" }.to_string(),
            version_link,
        })
        .collect();
    links.sort_by(|a, b| (&a.src, &a.dst, a.version_link).cmp(&(&b.src, &b.dst, b.version_link)));
    links.dedup();

    Ok(TraceResult { pinned: (pinned.clone(), spec.clone()), per_node, links })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)], added: &[&str], removed: &[&str]) -> ColumnMap {
        ColumnMap {
            pairs: pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            added: added.iter().map(|s| s.to_string()).collect(),
            removed: removed.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn backward_over_mutate() {
        let m = map(&[("A", "A"), ("A", "B")], &["B"], &[]);
        let got = substitute_encoding(&ChartSpec::histogram("B"), &m, true, Direction::Backward);
        assert_eq!(
            got,
            Substituted::Ok { spec: ChartSpec::histogram("A"), changes: vec![("B".into(), Some("A".into()))] }
        );
    }

    #[test]
    fn identity_edge_keeps_spec() {
        let spec = ChartSpec::bar_count("Type");
        let got = substitute_encoding(&spec, &ColumnMap::default(), false, Direction::Forward);
        assert_eq!(got, Substituted::Ok { spec, changes: vec![] });
    }

    #[test]
    fn forward_over_drop_fails() {
        let m = map(&[("b", "b")], &[], &["a"]);
        assert_eq!(
            substitute_encoding(&ChartSpec::histogram("a"), &m, true, Direction::Forward),
            Substituted::Failed { field: "a".into() }
        );
    }

    #[test]
    fn lost_color_is_dropped() {
        let m = map(&[("x", "x")], &[], &["g"]);
        let spec = ChartSpec::histogram("x").with_color("g");
        match substitute_encoding(&spec, &m, true, Direction::Forward) {
            Substituted::Ok { spec, changes } => {
                assert_eq!(spec, ChartSpec::histogram("x"));
                assert_eq!(changes, vec![("g".into(), None)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bijective_round_trip() {
        let m = map(&[("a", "alpha"), ("b", "b")], &["alpha"], &["a"]);
        let spec = ChartSpec::scatter("a", "b");
        let Substituted::Ok { spec: fwd, .. } = substitute_encoding(&spec, &m, true, Direction::Forward) else {
            panic!()
        };
        let Substituted::Ok { spec: back, .. } = substitute_encoding(&fwd, &m, true, Direction::Backward) else {
            panic!()
        };
        assert_eq!(back, spec);
    }
}
