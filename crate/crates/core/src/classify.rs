//! Transformation taxonomy: registry-driven classification of calls and
//! input/output column mappings.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::{ArgValue, AtomicCall, StatementIR, StatementKind};

pub const UNKNOWN: &str = "Unknown";

/// The twelve operations that alter column value distributions.
pub const TARGET_TYPES: [&str; 12] = [
    "mutate", "filter", "aggregate", "sort", "fill", "replace", "unfold", "extract", "deduplicate",
    "fold", "separate", "merge",
];

const DEFAULT_REGISTRY: &str = include_str!("../data/transforms.json");

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed registry: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid registry: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransformType {
    pub name: String,
    pub is_target: bool,
    pub is_schema_changing: bool,
}

impl TransformType {
    pub fn unknown() -> Self {
        TransformType {
            name: UNKNOWN.to_string(),
            is_target: false,
            is_schema_changing: true,
        }
    }

    pub fn is_unknown(&self) -> bool {
        self.name == UNKNOWN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kwarg: Option<String>,
    /// mask | slice | str | str_list | number | bool | dict | lambda | name | any | equals
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<serde_json::Value>,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub func: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub is_target: bool,
    pub schema_changing: bool,
    #[serde(default)]
    pub arg_rules: Vec<ArgRule>,
}

/// Immutable function → transform lookup table.
#[derive(Debug, Clone)]
pub struct Registry {
    entries: BTreeMap<String, RegistryEntry>,
    types: BTreeMap<String, TransformType>,
}

impl Registry {
    /// The registry shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_REGISTRY).expect("bundled registry is valid")
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let raw: Vec<RegistryEntry> = serde_json::from_str(text)?;
        Self::from_entries(raw)
    }

    pub fn from_entries(raw: Vec<RegistryEntry>) -> Result<Self, RegistryError> {
        let mut types: BTreeMap<String, TransformType> = BTreeMap::new();
        let mut entries = BTreeMap::new();
        for e in raw {
            if e.ty == UNKNOWN {
                return Err(RegistryError::Invalid(format!("{}: {UNKNOWN} is reserved", e.func)));
            }
            let ty = TransformType {
                name: e.ty.clone(),
                is_target: e.is_target,
                is_schema_changing: e.schema_changing,
            };
            match types.get(&e.ty) {
                Some(prev) if *prev != ty => {
                    return Err(RegistryError::Invalid(format!(
                        "type {} has inconsistent flags at {}",
                        e.ty, e.func
                    )))
                }
                _ => {
                    types.insert(e.ty.clone(), ty);
                }
            }
            if entries.contains_key(&e.func) {
                return Err(RegistryError::Invalid(format!("duplicate function {}", e.func)));
            }
            entries.insert(e.func.clone(), e);
        }
        for e in entries.values() {
            for r in &e.arg_rules {
                if !types.contains_key(&r.ty) && r.ty != UNKNOWN {
                    return Err(RegistryError::Invalid(format!("{}: rule names unknown type {}", e.func, r.ty)));
                }
                if r.arg.is_none() == r.kwarg.is_none() {
                    return Err(RegistryError::Invalid(format!("{}: rule needs exactly one of arg/kwarg", e.func)));
                }
            }
        }
        let targets: BTreeSet<&str> = types.values().filter(|t| t.is_target).map(|t| t.name.as_str()).collect();
        if targets.len() != TARGET_TYPES.len() {
            return Err(RegistryError::Invalid(format!(
                "expected {} target types, found {}",
                TARGET_TYPES.len(),
                targets.len()
            )));
        }
        Ok(Registry { entries, types })
    }

    /// All types, including the built-in Unknown.
    pub fn types(&self) -> Vec<TransformType> {
        let mut out: Vec<TransformType> = self.types.values().cloned().collect();
        out.push(TransformType::unknown());
        out
    }

    pub fn get_type(&self, name: &str) -> TransformType {
        self.types.get(name).cloned().unwrap_or_else(TransformType::unknown)
    }

    pub fn entries(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.values()
    }

    pub fn classify(&self, call: &AtomicCall) -> TransformType {
        for key in call.lookup_keys() {
            if let Some(entry) = self.entries.get(&key) {
                let name = entry
                    .arg_rules
                    .iter()
                    .find(|r| rule_matches(r, call))
                    .map(|r| r.ty.as_str())
                    .unwrap_or(&entry.ty);
                return self.get_type(name);
            }
        }
        TransformType::unknown()
    }
}

fn rule_matches(rule: &ArgRule, call: &AtomicCall) -> bool {
    let value = match (&rule.arg, &rule.kwarg) {
        (Some(i), _) => call.args.get(*i),
        (None, Some(k)) => call.kwarg(k),
        _ => None,
    };
    let Some(value) = value else {
        return rule.kind == "absent";
    };
    match rule.kind.as_str() {
        "any" => true,
        "mask" => matches!(value, ArgValue::Mask { .. }),
        "slice" => matches!(value, ArgValue::Slice { .. }),
        "str" => matches!(value, ArgValue::Str { .. }),
        "str_list" => value.as_str_list().is_some(),
        "number" => matches!(value, ArgValue::Number { .. }),
        "bool" => matches!(value, ArgValue::Bool { .. }),
        "dict" => matches!(value, ArgValue::Dict { .. }),
        "lambda" => matches!(value, ArgValue::Lambda { .. }),
        "name" => matches!(value, ArgValue::Name { .. }),
        "equals" => match (&rule.equals, value) {
            (Some(serde_json::Value::String(s)), ArgValue::Str { value }) => s == value,
            (Some(serde_json::Value::Number(n)), ArgValue::Number { value }) => {
                n.as_f64().zip(value.parse::<f64>().ok()).is_some_and(|(a, b)| a == b)
            }
            (Some(serde_json::Value::Bool(b)), ArgValue::Bool { value }) => b == value,
            _ => false,
        },
        _ => false,
    }
}

/// Classification of a whole statement (one flow edge).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTransform {
    /// The type reported for the edge: the last target step of the chain,
    /// else Unknown when any step is unknown, else the last step.
    pub primary: TransformType,
    pub steps: Vec<TransformType>,
    pub schema_changing: bool,
}

impl EdgeTransform {
    pub fn target_steps(&self) -> impl Iterator<Item = &TransformType> {
        self.steps.iter().filter(|s| s.is_target)
    }
}

/// Classifies the call chain of one statement.
pub fn classify_statement(registry: &Registry, stmt: &StatementIR) -> EdgeTransform {
    if stmt.kind == StatementKind::Loop || !stmt.is_parsed() {
        let u = TransformType::unknown();
        return EdgeTransform {
            primary: u.clone(),
            steps: vec![u],
            schema_changing: true,
        };
    }
    let steps: Vec<TransformType> = stmt.calls.iter().map(|c| registry.classify(c)).collect();
    if steps.is_empty() {
        // bare alias `b = a`
        let copy = registry.get_type("copy");
        return EdgeTransform {
            schema_changing: copy.is_schema_changing,
            primary: copy.clone(),
            steps: vec![copy],
        };
    }
    let primary = steps
        .iter()
        .rev()
        .find(|s| s.is_target)
        .or_else(|| steps.iter().find(|s| s.is_unknown()))
        .or(steps.last())
        .cloned()
        .unwrap_or_else(TransformType::unknown);
    EdgeTransform {
        schema_changing: steps.iter().any(|s| s.is_schema_changing),
        primary,
        steps,
    }
}

/// Input → output column correspondence of one transformation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub pairs: Vec<(String, String)>,
    pub added: Vec<String>,
    pub removed: Vec<String>,
}

impl ColumnMap {
    /// Identity on the schema intersection; the rest by schema diff.
    pub fn schema_diff(in_schema: &[String], out_schema: &[String]) -> Self {
        let pairs = out_schema
            .iter()
            .filter(|c| in_schema.contains(c))
            .map(|c| (c.clone(), c.clone()))
            .collect();
        ColumnMap {
            pairs,
            added: out_schema.iter().filter(|c| !in_schema.contains(c)).cloned().collect(),
            removed: in_schema.iter().filter(|c| !out_schema.contains(c)).cloned().collect(),
        }
    }

    /// Inputs feeding `output`, identity first.
    pub fn sources_of<'a>(&'a self, output: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        let identity = self.pairs.iter().find(|(i, o)| i == output && o == output);
        identity
            .into_iter()
            .chain(self.pairs.iter().filter(move |(i, o)| o == output && i != output))
            .map(|(i, _)| i.as_str())
    }

    /// Outputs produced from `input`, identity first.
    pub fn images_of<'a>(&'a self, input: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        let identity = self.pairs.iter().find(|(i, o)| i == input && o == input);
        identity
            .into_iter()
            .chain(self.pairs.iter().filter(move |(i, o)| i == input && o != input))
            .map(|(_, o)| o.as_str())
    }

    /// True when every output column has a source or is in `added`, and every
    /// input column has an image or is in `removed`.
    pub fn covers(&self, in_schema: &[String], out_schema: &[String]) -> bool {
        out_schema
            .iter()
            .all(|c| self.added.contains(c) || self.pairs.iter().any(|(_, o)| o == c))
            && in_schema
                .iter()
                .all(|c| self.removed.contains(c) || self.pairs.iter().any(|(i, _)| i == c))
    }

    fn link(&mut self, from: &str, to: &str) {
        if !self.pairs.iter().any(|(i, o)| i == from && o == to) {
            self.pairs.push((from.to_string(), to.to_string()));
        }
        self.added.retain(|c| c != to);
        self.removed.retain(|c| c != from);
    }
}

const MUTATE_FAMILY: [&str; 6] = ["mutate", "extract", "separate", "merge", "apply", "assign"];
const CONSUMING: [&str; 6] = ["aggregate", "groupby", "pivot", "unfold", "fold", "melt"];

/// Derives the column map of a single call.
pub fn derive_column_map(
    ty: &TransformType,
    call: &AtomicCall,
    in_schema: &[String],
    out_schema: &[String],
) -> (ColumnMap, Vec<String>) {
    derive_map(ty, std::slice::from_ref(call), std::slice::from_ref(ty), in_schema, out_schema)
}

/// Derives the column map of a statement from all its calls.
pub fn derive_edge_map(
    edge: &EdgeTransform,
    calls: &[AtomicCall],
    in_schema: &[String],
    out_schema: &[String],
) -> (ColumnMap, Vec<String>) {
    derive_map(&edge.primary, calls, &edge.steps, in_schema, out_schema)
}

fn derive_map(
    primary: &TransformType,
    calls: &[AtomicCall],
    steps: &[TransformType],
    in_schema: &[String],
    out_schema: &[String],
) -> (ColumnMap, Vec<String>) {
    let mut map = ColumnMap::schema_diff(in_schema, out_schema);
    let mut warnings = Vec::new();
    let schema_changing = steps.iter().any(|s| s.is_schema_changing) || primary.is_schema_changing;
    if !schema_changing || (map.added.is_empty() && map.removed.is_empty()) {
        return (map, warnings);
    }
    let has = |name: &str| steps.iter().any(|s| s.name == name) || primary.name == name;
    let refs: Vec<&str> = {
        let mut seen: Vec<&str> = Vec::new();
        for c in calls.iter().flat_map(|c| c.column_refs.iter()) {
            if !seen.contains(&c.as_str()) {
                seen.push(c);
            }
        }
        seen
    };

    if has("rename") {
        let renames = rename_pairs(calls, in_schema);
        let mut targets: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (old, new) in &renames {
            targets.entry(new.as_str()).or_default().push(old.as_str());
        }
        for (new, olds) in &targets {
            if olds.len() > 1 {
                warnings.push(format!("ambiguous mapping: {} all renamed to {new}", olds.join(", ")));
                continue;
            }
            let old = olds[0];
            if in_schema.iter().any(|c| c == old) && out_schema.iter().any(|c| c == new) && map.added.iter().any(|c| c == new) {
                map.link(old, new);
            }
        }
        return (map, warnings);
    }

    let mutate_like = MUTATE_FAMILY.iter().any(|t| has(t)) || calls.iter().any(|c| c.func_name == "setitem");
    let consuming = CONSUMING.iter().any(|t| has(t));
    if mutate_like || consuming {
        let sources: Vec<&str> = refs
            .iter()
            .copied()
            .filter(|r| in_schema.iter().any(|c| c == r))
            .filter(|r| mutate_like || !out_schema.iter().any(|c| c == r))
            .collect();
        let added = map.added.clone();
        for new in &added {
            for src in &sources {
                map.link(src, new);
            }
        }
    }
    (map, warnings)
}

fn rename_pairs(calls: &[AtomicCall], in_schema: &[String]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for call in calls {
        let dict = call
            .kwarg("columns")
            .filter(|v| matches!(v, ArgValue::Dict { .. }))
            .or_else(|| call.args.iter().find(|a| matches!(a, ArgValue::Dict { .. })));
        if let Some(ArgValue::Dict { entries }) = dict {
            for (k, v) in entries {
                if let (Some(k), Some(v)) = (k.as_str(), v.as_str()) {
                    out.push((k.to_string(), v.to_string()));
                }
            }
        }
        if call.func_name == "setattr" && call.accessor.as_deref().is_some_and(|a| a.ends_with("columns")) {
            if let Some(names) = call.kwarg("value").and_then(ArgValue::as_str_list) {
                if names.len() == in_schema.len() {
                    out.extend(in_schema.iter().zip(names).map(|(o, n)| (o.clone(), n.to_string())));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_statement;

    fn cols(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn edge_of(raw: &str) -> EdgeTransform {
        classify_statement(&Registry::builtin(), &parse_statement(raw, 1, 1))
    }

    #[test]
    fn builtin_registry_shape() {
        let reg = Registry::builtin();
        let types = reg.types();
        assert_eq!(types.len(), 30);
        let targets: BTreeSet<&str> = types.iter().filter(|t| t.is_target).map(|t| t.name.as_str()).collect();
        assert_eq!(targets, TARGET_TYPES.into_iter().collect());
        let changing = types.iter().filter(|t| t.is_schema_changing && !t.is_unknown()).count();
        assert_eq!(changing, 15);
        let unknown = types.iter().find(|t| t.is_unknown()).unwrap();
        assert!(!unknown.is_target && unknown.is_schema_changing);
    }

    #[test]
    fn single_calls() {
        let reg = Registry::builtin();
        let first = |raw: &str| reg.classify(&parse_statement(raw, 1, 1).calls[0]).name;
        assert_eq!(first("df.fillna(0)"), "fill");
        assert_eq!(first("df.replace('a', 'b')"), "replace");
        assert_eq!(first("df.frobnicate()"), UNKNOWN);
        assert_eq!(first("df[df['a'] > 1]"), "filter");
        assert_eq!(first("df[['a', 'b']]"), "select");
        assert_eq!(first("df[:10]"), "head");
        assert_eq!(first("df.dropna(axis=1)"), "drop");
        assert_eq!(first("df.dropna(axis='columns')"), "drop");
        assert_eq!(first("df['s'].str.split(',')"), "select");
        assert_eq!(reg.classify(&parse_statement("df['s'].str.split(',')", 1, 1).calls[1]).name, "separate");
    }

    #[test]
    fn chain_primary_type() {
        assert_eq!(edge_of("df['B'] = df['A'] * 2").primary.name, "mutate");
        assert_eq!(edge_of("df = df.groupby('c').mean()").primary.name, "aggregate");
        assert_eq!(edge_of("x = df.frobnicate().copy()").primary.name, UNKNOWN);
        assert_eq!(edge_of("x = df.copy()").primary.name, "copy");
        assert_eq!(edge_of("x = df").primary.name, "copy");
        assert_eq!(edge_of("df.loc[df['Size'] == 'x'] = 0").primary.name, "replace");
        let e = edge_of("df = df.fillna(0).rename(columns={'a': 'b'})");
        assert_eq!(e.primary.name, "fill");
        assert!(e.schema_changing);
    }

    #[test]
    fn registry_validation() {
        let bad_flags = r#"[{"func":"a","type":"fill","is_target":true,"schema_changing":false},
                           {"func":"b","type":"fill","is_target":false,"schema_changing":false}]"#;
        assert!(matches!(Registry::from_json(bad_flags), Err(RegistryError::Invalid(_))));
        assert!(matches!(Registry::from_json("{"), Err(RegistryError::Malformed(_))));
        let too_few = r#"[{"func":"a","type":"fill","is_target":true,"schema_changing":false}]"#;
        assert!(matches!(Registry::from_json(too_few), Err(RegistryError::Invalid(_))));
    }

    #[test]
    fn mutate_pairs_source_with_new_column() {
        let stmt = parse_statement("df['B'] = df['A'] * 2", 1, 1);
        let edge = classify_statement(&Registry::builtin(), &stmt);
        let (map, warnings) = derive_edge_map(&edge, &stmt.calls, &cols(&["A"]), &cols(&["A", "B"]));
        assert!(warnings.is_empty());
        assert!(map.pairs.contains(&("A".into(), "B".into())));
        assert!(map.added.is_empty());
        assert_eq!(map.sources_of("B").collect::<Vec<_>>(), vec!["A"]);
        assert_eq!(map.images_of("A").next(), Some("A"));
    }

    #[test]
    fn non_schema_changing_is_identity() {
        let stmt = parse_statement("df = df.sort_values('a')", 1, 1);
        let edge = classify_statement(&Registry::builtin(), &stmt);
        let s = cols(&["a", "b"]);
        let (map, _) = derive_edge_map(&edge, &stmt.calls, &s, &s);
        assert_eq!(map.pairs, vec![("a".into(), "a".into()), ("b".into(), "b".into())]);
        assert!(map.added.is_empty() && map.removed.is_empty());
    }

    #[test]
    fn groupby_mean_drops_non_numeric() {
        let stmt = parse_statement("g = df.groupby('cylinder').mean()", 1, 1);
        let edge = classify_statement(&Registry::builtin(), &stmt);
        let (map, _) = derive_edge_map(&edge, &stmt.calls, &cols(&["cylinder", "mpg", "name"]), &cols(&["cylinder", "mpg"]));
        assert_eq!(map.removed, vec!["name"]);
        assert_eq!(map.pairs, vec![("cylinder".into(), "cylinder".into()), ("mpg".into(), "mpg".into())]);
    }

    #[test]
    fn rename_uses_dictionary_and_flags_conflicts() {
        let stmt = parse_statement("df = df.rename(columns={'a': 'x'})", 1, 1);
        let edge = classify_statement(&Registry::builtin(), &stmt);
        let (map, w) = derive_edge_map(&edge, &stmt.calls, &cols(&["a", "b"]), &cols(&["x", "b"]));
        assert!(w.is_empty());
        assert!(map.pairs.contains(&("a".into(), "x".into())));
        assert!(map.added.is_empty() && map.removed.is_empty());

        let stmt = parse_statement("df = df.rename(columns={'a': 'x', 'b': 'x'})", 1, 1);
        let edge = classify_statement(&Registry::builtin(), &stmt);
        let (map, w) = derive_edge_map(&edge, &stmt.calls, &cols(&["a", "b"]), &cols(&["x"]));
        assert_eq!(w.len(), 1);
        assert_eq!(map.added, vec!["x"]);

        let stmt = parse_statement("df.columns = ['p', 'q']", 1, 1);
        let edge = classify_statement(&Registry::builtin(), &stmt);
        assert_eq!(edge.primary.name, "rename");
        let (map, _) = derive_edge_map(&edge, &stmt.calls, &cols(&["a", "b"]), &cols(&["p", "q"]));
        assert_eq!(map.pairs, vec![("a".into(), "p".into()), ("b".into(), "q".into())]);
    }
}
