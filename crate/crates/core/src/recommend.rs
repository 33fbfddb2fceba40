//! Chart candidates per node: querying (operation rules and data facts),
//! tag merging, and lexicographic ranking.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::chart::{Aggregate, ChartSpec, Mark};
use crate::config::Settings;
use crate::facts::{DataFact, FactKind};
use crate::graph::{FlowEdge, FlowGraph, NodeId};
use crate::parser::{ArgValue, AtomicCall};
use crate::snapshot::ColumnProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reason {
    Transformation,
    Fact,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecommendationTag {
    pub reason: Reason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fact_kind: Option<FactKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_epoch: Option<u32>,
    /// Line of the tagging statement, the secondary recency key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_line: Option<u32>,
    /// Source node of the tagging edge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_src: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    /// Fact columns, so that a fact seen twice stays one tag.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
}

impl RecommendationTag {
    pub fn transformation(transform: &str, edge: &FlowEdge, line: u32) -> Self {
        RecommendationTag {
            reason: Reason::Transformation,
            transform: Some(transform.to_string()),
            fact_kind: None,
            edge_epoch: Some(edge.epoch),
            edge_line: Some(line),
            edge_src: Some(edge.src.clone()),
            score: None,
            columns: Vec::new(),
        }
    }

    pub fn fact(fact: &DataFact) -> Self {
        RecommendationTag {
            reason: Reason::Fact,
            transform: None,
            fact_kind: Some(fact.kind),
            edge_epoch: None,
            edge_line: None,
            edge_src: None,
            score: Some(fact.score),
            columns: fact.columns.clone(),
        }
    }

    pub fn recency(&self) -> Option<(u32, u32)> {
        (self.reason == Reason::Transformation).then(|| (self.edge_epoch.unwrap_or(0), self.edge_line.unwrap_or(0)))
    }

    /// Matches "transformation", "fact", "transformation/fill",
    /// "fact/distribution", or a bare type or fact name.
    pub fn matches(&self, filter: &str) -> bool {
        let reason = match self.reason {
            Reason::Transformation => "transformation",
            Reason::Fact => "fact",
        };
        let detail = match (&self.transform, self.fact_kind) {
            (Some(t), _) => t.as_str(),
            (None, Some(k)) => k.as_str(),
            _ => "",
        };
        match filter.split_once('/') {
            Some((r, d)) => r == reason && d == detail,
            None => filter == reason || filter == detail,
        }
    }

    fn sort_key(&self) -> (Reason, &Option<String>, Option<FactKind>, Option<u32>, Option<u32>, &Option<NodeId>, &Vec<String>) {
        (self.reason, &self.transform, self.fact_kind, self.edge_epoch, self.edge_line, &self.edge_src, &self.columns)
    }
}

impl PartialEq for RecommendationTag {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RecommendationTag {}

impl PartialOrd for RecommendationTag {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RecommendationTag {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key()).then_with(|| {
            let s = |t: &Self| t.score.unwrap_or(f64::NEG_INFINITY);
            s(self).total_cmp(&s(other))
        })
    }
}

/// The six ranking criteria; larger is better in every component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RankKey {
    pub transformation: bool,
    pub recency: (u32, u32),
    pub distribution: bool,
    pub operated: bool,
    pub tag_count: usize,
    pub correlation: f64,
}

impl RankKey {
    /// Descending comparison: `Less` means `self` ranks first.
    pub fn compare(&self, other: &Self) -> Ordering {
        other
            .transformation
            .cmp(&self.transformation)
            .then(other.recency.cmp(&self.recency))
            .then(other.distribution.cmp(&self.distribution))
            .then(other.operated.cmp(&self.operated))
            .then(other.tag_count.cmp(&self.tag_count))
            .then(other.correlation.total_cmp(&self.correlation))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub node: NodeId,
    pub chart: ChartSpec,
    /// Sorted and free of duplicates.
    pub tags: Vec<RecommendationTag>,
    #[serde(default)]
    pub rank_key: RankKey,
    /// The chart was computed from a sampled snapshot.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub sampled: bool,
}

impl Recommendation {
    pub fn new(node: &NodeId, chart: ChartSpec, tag: RecommendationTag) -> Self {
        Recommendation { node: node.clone(), chart, tags: vec![tag], rank_key: RankKey::default(), sampled: false }
    }

    pub fn has_reason(&self, filter: &str) -> bool {
        self.tags.iter().any(|t| t.matches(filter))
    }

    /// Deterministic tie-break after the rank key.
    fn tie_break(&self, other: &Self) -> Ordering {
        let fields = |r: &Self| {
            (
                r.node.variable.clone(),
                r.node.clone(),
                r.chart.x.field.clone(),
                r.chart.y.field.clone(),
                r.chart.mark,
                r.chart.color.as_ref().and_then(|c| c.field.clone()),
            )
        };
        fields(self)
            .cmp(&fields(other))
            .then_with(|| self.chart.cmp(&other.chart))
            .then_with(|| self.tags.cmp(&other.tags))
    }
}

/// Columns touched by a node's incoming edges: column refs, non-identity
/// map pairs (both ends), and added columns.
pub fn operated_columns(graph: &FlowGraph, node: &NodeId) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for e in graph.incoming(node) {
        if let Some(stmt) = graph.statements.get(e.statement) {
            out.extend(stmt.ir.calls.iter().flat_map(|c| c.column_refs.iter().cloned()));
        }
        for (a, b) in &e.column_map.pairs {
            if a != b {
                out.insert(a.clone());
                out.insert(b.clone());
            }
        }
        out.extend(e.column_map.added.iter().cloned());
    }
    out
}

fn profile_of<'a>(profiles: &'a [ColumnProfile], name: &str) -> Option<&'a ColumnProfile> {
    profiles.iter().find(|p| p.name == name)
}

fn push_unique(out: &mut Vec<String>, items: impl IntoIterator<Item = String>) {
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
}

fn aggregate_of(call: &AtomicCall) -> Aggregate {
    let name = match call.func_name.as_str() {
        "agg" | "aggregate" => call.args.first().and_then(ArgValue::as_str).unwrap_or("mean").to_string(),
        f => f.to_string(),
    };
    match name.as_str() {
        "sum" | "count" | "size" | "nunique" => Aggregate::Sum,
        _ => Aggregate::Mean,
    }
}

/// Charts implied by the target operations on the node's incoming edges.
pub fn generate_from_ops(
    graph: &FlowGraph,
    node: &NodeId,
    profiles: &[ColumnProfile],
    settings: &Settings,
) -> Vec<Recommendation> {
    let Some(n) = graph.node(node) else { return Vec::new() };
    if !n.has_snapshot {
        return Vec::new();
    }
    let mut out = Vec::new();
    for edge in graph.incoming(node) {
        let Some(stmt) = graph.statements.get(edge.statement) else { continue };
        let calls = &stmt.ir.calls;
        let all_refs: Vec<String> = {
            let mut v = Vec::new();
            push_unique(&mut v, calls.iter().flat_map(|c| c.column_refs.iter().cloned()));
            v
        };
        let in_schema = |c: &String| profile_of(profiles, c).is_some();
        for (i, step) in edge.transform.steps.iter().enumerate() {
            if !step.is_target {
                continue;
            }
            let call = calls.get(i);
            let step_refs: Vec<String> = call.map(|c| c.column_refs.clone()).unwrap_or_default();
            let tag = || RecommendationTag::transformation(&step.name, edge, stmt.ir.line_id);
            let mut emit = |chart: ChartSpec| {
                if chart.validate().is_ok() {
                    out.push(Recommendation::new(node, chart, tag()));
                }
            };
            // the step's own refs, else any ref of the statement
            let named: Vec<String> = if step_refs.iter().any(in_schema) { step_refs.clone() } else { all_refs.clone() };
            match step.name.as_str() {
                "replace" => {
                    for c in named.iter().filter(|c| in_schema(c)) {
                        emit(ChartSpec::bar_count(c));
                    }
                }
                "fill" | "filter" | "deduplicate" | "sort" => {
                    let cols: Vec<&ColumnProfile> = if named.iter().any(in_schema) {
                        named.iter().filter_map(|c| profile_of(profiles, c)).collect()
                    } else {
                        profiles.iter().collect()
                    };
                    for p in cols {
                        emit(ChartSpec::distribution(p));
                    }
                }
                "mutate" | "extract" | "separate" | "merge" => {
                    let mut produced: Vec<String> = Vec::new();
                    let images = edge.column_map.pairs.iter().filter(|(a, b)| a != b).map(|(_, b)| b.clone());
                    push_unique(&mut produced, images.chain(edge.column_map.added.iter().cloned()));
                    if produced.is_empty() {
                        let stores = calls.iter().filter(|c| c.func_name == "setitem");
                        push_unique(&mut produced, stores.flat_map(|c| c.column_refs.iter().cloned()));
                    }
                    if produced.is_empty() {
                        produced = named.clone();
                    }
                    for p in produced.iter().filter_map(|c| profile_of(profiles, c)) {
                        emit(ChartSpec::distribution(p));
                    }
                }
                "aggregate" => {
                    let keys: Vec<String> = calls
                        .iter()
                        .filter(|c| c.func_name == "groupby")
                        .flat_map(|c| c.column_refs.iter().cloned())
                        .filter(|c| in_schema(c))
                        .collect();
                    let agg = call.map(aggregate_of).unwrap_or(Aggregate::Mean);
                    for key in &keys {
                        for v in profiles.iter().filter(|p| p.dtype.is_numeric() && !keys.contains(&p.name)) {
                            emit(ChartSpec::bar_aggregate(key, &v.name, agg));
                        }
                    }
                }
                "fold" | "unfold" => {
                    let axes: Vec<&ColumnProfile> = named
                        .iter()
                        .filter_map(|c| profile_of(profiles, c))
                        .filter(|p| p.is_color_candidate(settings.categorical_cap))
                        .collect();
                    if let [a, b, ..] = axes.as_slice() {
                        emit(ChartSpec::heatmap(&a.name, &b.name));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// One candidate per fact.
pub fn generate_from_facts(node: &NodeId, facts: &[DataFact], profiles: &[ColumnProfile]) -> Vec<Recommendation> {
    let mut out = Vec::new();
    for f in facts {
        let chart = match (f.kind, f.columns.as_slice()) {
            (FactKind::Distribution, [c]) => profile_of(profiles, c).map(ChartSpec::distribution),
            (FactKind::Distribution, [c, by]) => {
                profile_of(profiles, c).map(|p| ChartSpec::distribution(p).with_color(by))
            }
            (FactKind::Correlation, [a, b]) => Some(ChartSpec::scatter(a, b)),
            (FactKind::Trend, [t, v]) => Some(ChartSpec::line(t, v)),
            _ => None,
        };
        if let Some(chart) = chart.filter(|c| c.validate().is_ok()) {
            out.push(Recommendation::new(node, chart, RecommendationTag::fact(f)));
        }
    }
    out
}

/// Color-enhanced variants of every uncolored candidate.
pub fn enhance_with_color(candidates: &[Recommendation], profiles: &[ColumnProfile], settings: &Settings) -> Vec<Recommendation> {
    let colors: Vec<&ColumnProfile> = profiles.iter().filter(|p| p.is_color_candidate(settings.categorical_cap)).collect();
    let mut out = Vec::new();
    for base in candidates.iter().filter(|c| c.chart.color.is_none() && c.chart.mark != Mark::Heatmap) {
        for col in colors.iter().filter(|c| !base.chart.encodes(&c.name)) {
            let chart = base.chart.clone().with_color(&col.name);
            if chart.validate().is_ok() {
                out.push(Recommendation { chart, rank_key: RankKey::default(), ..base.clone() });
            }
        }
    }
    out
}

/// Merges candidates sharing (node, chart) into one with the union of tags.
/// Output order follows first appearance.
pub fn dedup_merge_tags(candidates: Vec<Recommendation>) -> Vec<Recommendation> {
    let mut index: BTreeMap<(NodeId, ChartSpec), usize> = BTreeMap::new();
    let mut out: Vec<Recommendation> = Vec::new();
    for mut c in candidates {
        match index.get(&(c.node.clone(), c.chart.clone())) {
            Some(&i) => {
                let merged = &mut out[i];
                merged.tags.append(&mut c.tags);
                merged.tags.sort();
                merged.tags.dedup();
                merged.sampled |= c.sampled;
            }
            None => {
                c.tags.sort();
                c.tags.dedup();
                index.insert((c.node.clone(), c.chart.clone()), out.len());
                out.push(c);
            }
        }
    }
    out
}

pub fn rank_key(rec: &Recommendation, operated: &BTreeSet<String>) -> RankKey {
    let transformation = rec.tags.iter().any(|t| t.reason == Reason::Transformation);
    RankKey {
        transformation,
        recency: rec.tags.iter().filter_map(RecommendationTag::recency).max().unwrap_or((0, 0)),
        distribution: rec.tags.iter().any(|t| t.fact_kind == Some(FactKind::Distribution)),
        operated: rec.chart.fields().iter().any(|f| operated.contains(*f)),
        tag_count: rec.tags.len(),
        correlation: if rec.chart.mark == Mark::Scatter {
            rec.tags
                .iter()
                .filter(|t| t.fact_kind == Some(FactKind::Correlation))
                .filter_map(|t| t.score)
                .fold(0.0, f64::max)
        } else {
            0.0
        },
    }
}

/// Full candidate ordering: rank key, then the tie-break.
pub fn compare(a: &Recommendation, b: &Recommendation) -> Ordering {
    a.rank_key.compare(&b.rank_key).then_with(|| a.tie_break(b))
}

/// Computes rank keys (operated columns per node) and sorts.
pub fn rank(mut candidates: Vec<Recommendation>, operated: &BTreeMap<NodeId, BTreeSet<String>>) -> Vec<Recommendation> {
    let empty = BTreeSet::new();
    for c in &mut candidates {
        c.rank_key = rank_key(c, operated.get(&c.node).unwrap_or(&empty));
    }
    candidates.sort_by(compare);
    candidates
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateFilter {
    /// Table variable; `None` means the latest variable among the candidates.
    pub table: Option<String>,
    /// Keep charts encoding any of these columns.
    pub columns: Option<BTreeSet<String>>,
    /// Keep charts with a tag matching any of these.
    pub reasons: Option<BTreeSet<String>>,
    /// Disable the latest-variable default.
    pub all_tables: bool,
}

/// Order-preserving filter over a ranked list.
pub fn filter_candidates(ranked: &[Recommendation], filter: &CandidateFilter) -> Vec<Recommendation> {
    let table = filter.table.clone().or_else(|| {
        if filter.all_tables {
            return None;
        }
        // the latest non-display assignment wins; display nodes share their line
        ranked.iter().map(|r| &r.node).max_by_key(|n| (n.cell_exec, n.line_id)).map(|n| n.variable.clone())
    });
    ranked
        .iter()
        .filter(|r| table.as_ref().is_none_or(|t| &r.node.variable == t))
        .filter(|r| filter.columns.as_ref().is_none_or(|cols| r.chart.fields().iter().any(|f| cols.contains(*f))))
        .filter(|r| filter.reasons.as_ref().is_none_or(|rs| rs.iter().any(|x| r.has_reason(x))))
        .cloned()
        .collect()
}

/// Full per-node pipeline: generate, enhance, merge, rank, and cap.
pub fn recommend_node(
    graph: &FlowGraph,
    node: &NodeId,
    profiles: &[ColumnProfile],
    facts: &[DataFact],
    sampled: bool,
    settings: &Settings,
) -> Vec<Recommendation> {
    let mut base = generate_from_ops(graph, node, profiles, settings);
    base.extend(generate_from_facts(node, facts, profiles));
    let base = dedup_merge_tags(base);
    let mut all = enhance_with_color(&base, profiles, settings);
    all.splice(0..0, base);
    let mut merged = dedup_merge_tags(all);
    for r in &mut merged {
        r.sampled = sampled;
    }
    let operated = BTreeMap::from([(node.clone(), operated_columns(graph, node))]);
    let mut ranked = rank(merged, &operated);
    if !settings.full_candidates {
        ranked.truncate(settings.candidate_cap);
    }
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Registry;
    use crate::graph::{FlowNode, FlowStatement};
    use crate::parser::parse_statement;
    use crate::snapshot::DType;

    fn prof(name: &str, dtype: DType, distinct: usize) -> ColumnProfile {
        ColumnProfile {
            name: name.into(),
            dtype,
            null_count: 0,
            distinct_count: distinct,
            min: None,
            max: None,
            is_temporal: false,
            is_categorical: matches!(dtype, DType::String) || distinct <= 20,
        }
    }

    /// Graph with one edge a -> b produced by `raw`.
    fn one_edge(raw: &str, in_schema: &[&str], out_schema: &[&str]) -> (FlowGraph, NodeId) {
        let reg = Registry::builtin();
        let ir = parse_statement(raw, 2, 1);
        let transform = crate::classify::classify_statement(&reg, &ir);
        let cols = |s: &[&str]| s.iter().map(|c| c.to_string()).collect::<Vec<_>>();
        let (column_map, _) = crate::classify::derive_edge_map(&transform, &ir.calls, &cols(in_schema), &cols(out_schema));
        let a = NodeId::new("df", 1, 1);
        let b = NodeId::new(ir.targets.first().cloned().unwrap_or("df".into()), 2, 1);
        let node = |id: &NodeId, epoch, schema: &[&str]| FlowNode {
            id: id.clone(),
            epoch,
            cell_pos: epoch,
            has_snapshot: true,
            schema: cols(schema),
            is_display: false,
            statement: 0,
            column: 0,
        };
        let mut g = FlowGraph::default();
        g.nodes = vec![node(&a, 1, in_schema), node(&b, 2, out_schema)];
        g.edges = vec![FlowEdge { src: a, dst: b.clone(), transform: transform.clone(), column_map, statement: 0, epoch: 2 }];
        g.statements = vec![FlowStatement { epoch: 2, cell_pos: 2, exec_count: 2, ir, transform }];
        g.reindex();
        (g, b)
    }

    #[test]
    fn replace_yields_count_bar() {
        let (g, n) = one_edge("df.loc[df['Size'] == 'Varies with device'] = 0", &["Size", "Type"], &["Size", "Type"]);
        let profiles = [prof("Size", DType::String, 50), prof("Type", DType::String, 3)];
        let recs = generate_from_ops(&g, &n, &profiles, &Settings::default());
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].chart, ChartSpec::bar_count("Size"));
        assert!(recs[0].has_reason("transformation/replace"));
    }

    #[test]
    fn fill_yields_histogram() {
        let (g, n) = one_edge("df['mpg'] = df['mpg'].fillna(0)", &["mpg"], &["mpg"]);
        let recs = generate_from_ops(&g, &n, &[prof("mpg", DType::Float, 100)], &Settings::default());
        assert!(recs.iter().any(|r| r.chart == ChartSpec::histogram("mpg") && r.has_reason("fill")));
    }

    #[test]
    fn aggregate_yields_grouped_bar() {
        let (g, n) = one_edge(
            "g = df.groupby('cylinder').mean().reset_index()",
            &["cylinder", "mpg", "name"],
            &["cylinder", "mpg"],
        );
        let profiles = [prof("cylinder", DType::Int, 5), prof("mpg", DType::Float, 5)];
        let recs = generate_from_ops(&g, &n, &profiles, &Settings::default());
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].chart, ChartSpec::bar_aggregate("cylinder", "mpg", Aggregate::Mean));
    }

    #[test]
    fn mutate_charts_produced_column() {
        let (g, n) = one_edge("df['B'] = df['A'] * 2", &["A"], &["A", "B"]);
        let profiles = [prof("A", DType::Float, 100), prof("B", DType::Float, 100)];
        let recs = generate_from_ops(&g, &n, &profiles, &Settings::default());
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].chart, ChartSpec::histogram("B"));
        assert!(operated_columns(&g, &n).contains("A"));
    }

    #[test]
    fn fact_charts() {
        let node = NodeId::new("df", 1, 1);
        let fact = |kind, cols: &[&str], score| DataFact {
            kind,
            columns: cols.iter().map(|c| c.to_string()).collect(),
            score,
            node: node.to_string(),
            r: None,
        };
        let profiles = [prof("hp", DType::Float, 90), prof("weight", DType::Float, 90), prof("Type", DType::String, 25)];
        let recs = generate_from_facts(
            &node,
            &[
                fact(FactKind::Correlation, &["hp", "weight"], 0.86),
                fact(FactKind::Trend, &["date", "recovered"], 1.0),
                fact(FactKind::Distribution, &["Type"], 0.5),
            ],
            &profiles,
        );
        assert_eq!(recs[0].chart, ChartSpec::scatter("hp", "weight"));
        assert_eq!(recs[1].chart, ChartSpec::line("date", "recovered"));
        assert_eq!(recs[2].chart, ChartSpec::bar_count("Type"));
    }

    #[test]
    fn color_variants() {
        let node = NodeId::new("df", 1, 1);
        let base = Recommendation::new(&node, ChartSpec::histogram("mpg"), tag_fact(FactKind::Distribution, 0.5));
        let profiles = [prof("mpg", DType::Float, 100), prof("origin", DType::String, 3), prof("make", DType::String, 10)];
        let v = enhance_with_color(std::slice::from_ref(&base), &profiles, &Settings::default());
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|r| r.tags == base.tags));
        let none = enhance_with_color(&[base], &profiles[..1], &Settings::default());
        assert!(none.is_empty());
    }

    fn tag_fact(kind: FactKind, score: f64) -> RecommendationTag {
        RecommendationTag {
            reason: Reason::Fact,
            transform: None,
            fact_kind: Some(kind),
            edge_epoch: None,
            edge_line: None,
            edge_src: None,
            score: Some(score),
            columns: vec!["mpg".into()],
        }
    }

    fn tag_op(name: &str, epoch: u32) -> RecommendationTag {
        RecommendationTag {
            reason: Reason::Transformation,
            transform: Some(name.into()),
            fact_kind: None,
            edge_epoch: Some(epoch),
            edge_line: Some(1),
            edge_src: None,
            score: None,
            columns: Vec::new(),
        }
    }

    #[test]
    fn merging_unions_tags() {
        let node = NodeId::new("df", 1, 1);
        let h = ChartSpec::histogram("mpg");
        let merged = dedup_merge_tags(vec![
            Recommendation::new(&node, h.clone(), tag_op("fill", 3)),
            Recommendation::new(&node, h.clone(), tag_fact(FactKind::Distribution, 0.5)),
            Recommendation::new(&node, h.clone(), tag_op("filter", 4)),
            Recommendation::new(&node, ChartSpec::bar_count("x"), tag_op("fill", 3)),
        ]);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].tags.len(), 3);
        assert_eq!(dedup_merge_tags(merged.clone()), merged);
    }

    #[test]
    fn ranking_examples() {
        let node = NodeId::new("df", 1, 1);
        let recs = vec![
            Recommendation::new(&node, ChartSpec::histogram("a"), tag_fact(FactKind::Distribution, 0.5)),
            Recommendation::new(&node, ChartSpec::histogram("b"), tag_op("fill", 3)),
            Recommendation::new(&node, ChartSpec::histogram("c"), tag_op("fill", 5)),
        ];
        let ranked = rank(recs, &BTreeMap::new());
        let order: Vec<&str> = ranked.iter().map(|r| r.chart.x.name()).collect();
        assert_eq!(order, ["c", "b", "a"]);
    }

    #[test]
    fn filters() {
        let a = NodeId::new("df", 2, 1);
        let b = NodeId::new("df2", 2, 2);
        let ranked = vec![
            Recommendation::new(&a, ChartSpec::bar_count("Type"), tag_op("fill", 2)),
            Recommendation::new(&b, ChartSpec::bar_count("Type"), tag_op("replace", 2)),
            Recommendation::new(&b, ChartSpec::histogram("x"), tag_fact(FactKind::Distribution, 0.5)),
        ];
        let latest = filter_candidates(&ranked, &CandidateFilter::default());
        assert!(latest.iter().all(|r| r.node == b));
        let f = CandidateFilter { reasons: Some(["transformation/fill".to_string()].into()), all_tables: true, ..Default::default() };
        assert_eq!(filter_candidates(&ranked, &f).len(), 1);
        let f = CandidateFilter { columns: Some(["Type".to_string()].into()), all_tables: true, ..Default::default() };
        assert_eq!(filter_candidates(&ranked, &f).len(), 2);
    }

    #[test]
    fn non_target_edge_emits_nothing() {
        let (g, n) = one_edge("df = df.copy()", &["a"], &["a"]);
        assert!(generate_from_ops(&g, &n, &[prof("a", DType::Float, 9)], &Settings::default()).is_empty());
    }
}
