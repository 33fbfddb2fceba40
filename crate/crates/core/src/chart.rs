//! Declarative chart specs and the data series they render to.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::Settings;
use crate::facts::{bin_edges, bin_index, OTHER_BUCKET};
use crate::snapshot::{ColumnData, ColumnProfile, TableSnapshot};

/// Group label for rows whose color field is null.
pub const NULL_GROUP: &str = "(null)";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChartError {
    #[error("field {0} is not in the table schema")]
    SpecSchemaMismatch(String),
    #[error("invalid chart spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Histogram,
    Bar,
    Line,
    Scatter,
    Heatmap,
}

impl Mark {
    pub fn as_str(self) -> &'static str {
        match self {
            Mark::Histogram => "histogram",
            Mark::Bar => "bar",
            Mark::Line => "line",
            Mark::Scatter => "scatter",
            Mark::Heatmap => "heatmap",
        }
    }
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingType {
    Quantitative,
    Nominal,
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Count,
    Mean,
    Sum,
}

/// One channel. `field: None` is the record count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Encoding {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(rename = "type")]
    pub ty: EncodingType,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub bin: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
}

impl Encoding {
    pub fn field(name: &str, ty: EncodingType) -> Self {
        Encoding { field: Some(name.to_string()), ty, bin: false, aggregate: None }
    }

    pub fn count() -> Self {
        Encoding { field: None, ty: EncodingType::Quantitative, bin: false, aggregate: Some(Aggregate::Count) }
    }

    pub fn is_count(&self) -> bool {
        self.field.is_none() && self.aggregate == Some(Aggregate::Count)
    }

    pub fn name(&self) -> &str {
        self.field.as_deref().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
struct Encodings {
    x: Encoding,
    y: Encoding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    color: Option<Encoding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
struct RawSpec {
    mark: Mark,
    encoding: Encodings,
}

/// Serialized as `{"mark": .., "encoding": {"x": .., "y": .., "color": ..}}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ChartSpec {
    pub mark: Mark,
    pub x: Encoding,
    pub y: Encoding,
    pub color: Option<Encoding>,
}

impl From<ChartSpec> for RawSpec {
    fn from(s: ChartSpec) -> Self {
        RawSpec { mark: s.mark, encoding: Encodings { x: s.x, y: s.y, color: s.color } }
    }
}

impl TryFrom<RawSpec> for ChartSpec {
    type Error = ChartError;

    fn try_from(r: RawSpec) -> Result<Self, Self::Error> {
        let spec = ChartSpec { mark: r.mark, x: r.encoding.x, y: r.encoding.y, color: r.encoding.color };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for ChartSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let y = if self.y.is_count() {
            "COUNT".to_string()
        } else {
            match self.y.aggregate {
                Some(Aggregate::Mean) => format!("mean({})", self.y.name()),
                Some(Aggregate::Sum) => format!("sum({})", self.y.name()),
                _ => self.y.name().to_string(),
            }
        };
        write!(f, "{}(x={}, y={y}", self.mark, self.x.name())?;
        if let Some(c) = &self.color {
            write!(f, ", color={}", c.name())?;
        }
        f.write_str(")")
    }
}

impl ChartSpec {
    pub fn histogram(column: &str) -> Self {
        let mut x = Encoding::field(column, EncodingType::Quantitative);
        x.bin = true;
        ChartSpec { mark: Mark::Histogram, x, y: Encoding::count(), color: None }
    }

    pub fn bar_count(column: &str) -> Self {
        ChartSpec {
            mark: Mark::Bar,
            x: Encoding::field(column, EncodingType::Nominal),
            y: Encoding::count(),
            color: None,
        }
    }

    pub fn bar_aggregate(key: &str, value: &str, aggregate: Aggregate) -> Self {
        let mut y = Encoding::field(value, EncodingType::Quantitative);
        y.aggregate = Some(aggregate);
        ChartSpec { mark: Mark::Bar, x: Encoding::field(key, EncodingType::Nominal), y, color: None }
    }

    pub fn scatter(x: &str, y: &str) -> Self {
        ChartSpec {
            mark: Mark::Scatter,
            x: Encoding::field(x, EncodingType::Quantitative),
            y: Encoding::field(y, EncodingType::Quantitative),
            color: None,
        }
    }

    pub fn line(time: &str, value: &str) -> Self {
        ChartSpec {
            mark: Mark::Line,
            x: Encoding::field(time, EncodingType::Temporal),
            y: Encoding::field(value, EncodingType::Quantitative),
            color: None,
        }
    }

    pub fn heatmap(x: &str, y: &str) -> Self {
        ChartSpec {
            mark: Mark::Heatmap,
            x: Encoding::field(x, EncodingType::Nominal),
            y: Encoding::field(y, EncodingType::Nominal),
            color: None,
        }
    }

    /// Histogram for numeric columns, count bar otherwise.
    pub fn distribution(profile: &ColumnProfile) -> Self {
        if profile.dtype.is_numeric() {
            Self::histogram(&profile.name)
        } else {
            Self::bar_count(&profile.name)
        }
    }

    pub fn with_color(mut self, column: &str) -> Self {
        self.color = Some(Encoding::field(column, EncodingType::Nominal));
        self
    }

    /// Encoded column names in channel order (x, y, color).
    pub fn fields(&self) -> Vec<&str> {
        [Some(&self.x), Some(&self.y), self.color.as_ref()]
            .into_iter()
            .flatten()
            .filter_map(|e| e.field.as_deref())
            .collect()
    }

    pub fn encodes(&self, column: &str) -> bool {
        self.fields().contains(&column)
    }

    /// Checks the per-mark encoding rules.
    pub fn validate(&self) -> Result<(), ChartError> {
        use EncodingType::*;
        let bad = |m: &str| Err(ChartError::InvalidSpec(format!("{}: {m}", self.mark)));
        let plain = |e: &Encoding, ty: EncodingType| e.field.is_some() && e.ty == ty && !e.bin && e.aggregate.is_none();
        match self.mark {
            Mark::Histogram => {
                if !(self.x.field.is_some() && self.x.ty == Quantitative && self.x.bin && self.x.aggregate.is_none()) {
                    return bad("x must be a binned quantitative field");
                }
                if !self.y.is_count() {
                    return bad("y must be the record count");
                }
            }
            Mark::Bar => {
                if !plain(&self.x, Nominal) {
                    return bad("x must be a nominal field");
                }
                let agg = self.y.field.is_some()
                    && self.y.ty == Quantitative
                    && !self.y.bin
                    && matches!(self.y.aggregate, Some(Aggregate::Mean | Aggregate::Sum));
                if !(self.y.is_count() || agg) {
                    return bad("y must be the record count or an aggregated quantitative field");
                }
            }
            Mark::Scatter => {
                if !(plain(&self.x, Quantitative) && plain(&self.y, Quantitative)) {
                    return bad("x and y must be plain quantitative fields");
                }
            }
            Mark::Line => {
                if !(plain(&self.x, Temporal) && self.y.field.is_some() && self.y.ty == Quantitative && !self.y.bin) {
                    return bad("x must be temporal and y quantitative");
                }
            }
            Mark::Heatmap => {
                if !(plain(&self.x, Nominal) && plain(&self.y, Nominal)) {
                    return bad("x and y must be nominal fields");
                }
                if self.color.is_some() {
                    return bad("color is the implicit count");
                }
            }
        }
        if let Some(c) = &self.color {
            if !plain(c, Nominal) {
                return bad("color must be a nominal field");
            }
        }
        if let Some(c) = self.color.as_ref().and_then(|c| c.field.as_deref()) {
            if self.x.field.as_deref() == Some(c) || self.y.field.as_deref() == Some(c) {
                return bad("color repeats a positional field");
            }
        }
        Ok(())
    }

    /// Equivalent Vega-Lite JSON.
    pub fn to_vega_lite(&self) -> Value {
        let enc = |e: &Encoding| serde_json::to_value(e).unwrap_or(Value::Null);
        let mut encoding = serde_json::Map::new();
        encoding.insert("x".into(), enc(&self.x));
        encoding.insert("y".into(), enc(&self.y));
        let mark = match self.mark {
            Mark::Histogram | Mark::Bar => "bar",
            Mark::Line => "line",
            Mark::Scatter => "point",
            Mark::Heatmap => {
                encoding.insert("color".into(), enc(&Encoding::count()));
                "rect"
            }
        };
        if let Some(c) = &self.color {
            encoding.insert("color".into(), enc(c));
        }
        json!({ "mark": mark, "encoding": encoding })
    }
}

/// Position of a data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataKey {
    Bin { lo: f64, hi: f64 },
    Label(String),
    Pair(String, String),
    Num(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub key: DataKey,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    /// Color group; `None` without a color channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub points: Vec<DataPoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChartData {
    pub series: Vec<Series>,
}

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    a == b || (a - b).abs() <= abs.max(rel * a.abs().max(b.abs()))
}

fn key_close(a: &DataKey, b: &DataKey, rel: f64, abs: f64) -> bool {
    match (a, b) {
        (DataKey::Bin { lo: a0, hi: a1 }, DataKey::Bin { lo: b0, hi: b1 }) => {
            close(*a0, *b0, rel, abs) && close(*a1, *b1, rel, abs)
        }
        (DataKey::Num(x), DataKey::Num(y)) => close(*x, *y, rel, abs),
        (a, b) => a == b,
    }
}

impl ChartData {
    /// Sum of all point values.
    pub fn total(&self) -> f64 {
        self.series.iter().flat_map(|s| &s.points).map(|p| p.value).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.series.iter().all(|s| s.points.is_empty())
    }

    /// True when the key sets differ or any value differs beyond tolerance.
    /// Point order within a series does not matter for labelled keys.
    pub fn differs(&self, other: &ChartData, rel: f64, abs: f64) -> bool {
        let groups = |d: &ChartData| -> BTreeMap<Option<String>, Vec<DataPoint>> {
            let mut m: BTreeMap<Option<String>, Vec<DataPoint>> = BTreeMap::new();
            for s in &d.series {
                let mut pts = s.points.clone();
                pts.sort_by(|a, b| match (&a.key, &b.key) {
                    (DataKey::Label(x), DataKey::Label(y)) => x.cmp(y),
                    (DataKey::Pair(x0, x1), DataKey::Pair(y0, y1)) => (x0, x1).cmp(&(y0, y1)),
                    _ => std::cmp::Ordering::Equal,
                });
                m.entry(s.group.clone()).or_default().extend(pts);
            }
            m
        };
        let (a, b) = (groups(self), groups(other));
        if a.len() != b.len() {
            return true;
        }
        for ((ga, pa), (gb, pb)) in a.iter().zip(&b) {
            if ga != gb || pa.len() != pb.len() {
                return true;
            }
            for (x, y) in pa.iter().zip(pb) {
                if !key_close(&x.key, &y.key, rel, abs) || !close(x.value, y.value, rel, abs) {
                    return true;
                }
            }
        }
        false
    }
}

/// Numeric view of any column; non-numeric cells that parse as numbers are
/// used, others count as null.
fn numeric_view(data: &ColumnData) -> Vec<Option<f64>> {
    data.numeric().unwrap_or_else(|| {
        (0..data.len())
            .map(|r| data.label(r).and_then(|l| l.trim().parse::<f64>().ok()).filter(|x| x.is_finite()))
            .collect()
    })
}

/// True when every non-null cell reads as a finite number.
fn numeric_like(data: &ColumnData) -> bool {
    data.numeric().is_some() || numeric_view(data).iter().flatten().count() == data.len() - data.null_count()
}

fn label_counts(keys: impl IntoIterator<Item = String>) -> Vec<DataPoint> {
    ordered_counts(keys)
        .into_iter()
        .map(|(k, c)| DataPoint { key: DataKey::Label(k), value: c as f64 })
        .collect()
}

fn count_series(xs: &[Option<String>], groups: &[Option<String>], order: &[Option<String>]) -> Vec<Series> {
    order
        .iter()
        .map(|g| Series {
            group: g.clone(),
            points: label_counts(xs.iter().zip(groups).filter(|(_, gr)| *gr == g).filter_map(|(x, _)| x.clone())),
        })
        .collect()
}

fn labels(data: &ColumnData) -> Vec<Option<String>> {
    (0..data.len()).map(|r| data.label(r)).collect()
}

/// Top `cap` labels by count (ties by label); others map to the other bucket.
fn capped_labels(values: &[Option<String>], cap: usize) -> Vec<Option<String>> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values.iter().flatten() {
        *counts.entry(v).or_default() += 1;
    }
    let mut sorted: Vec<(&str, usize)> = counts.into_iter().collect();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let keep: std::collections::HashSet<&str> = sorted.iter().take(cap).map(|(l, _)| *l).collect();
    values
        .iter()
        .map(|v| v.as_ref().map(|l| if keep.contains(l.as_str()) { l.clone() } else { OTHER_BUCKET.to_string() }))
        .collect()
}

/// Keys in the order: descending count, then label; the other bucket last.
fn ordered_counts(keys: impl IntoIterator<Item = String>) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_default() += 1;
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().collect();
    out.sort_by(|a, b| {
        (a.0 == OTHER_BUCKET)
            .cmp(&(b.0 == OTHER_BUCKET))
            .then(b.1.cmp(&a.1))
            .then_with(|| a.0.cmp(&b.0))
    });
    out
}

/// Renders `spec` against `snapshot`. Fields with an unexpected dtype are
/// coerced (numbers parsed from text, labels from numbers) instead of failing.
pub fn render_data(spec: &ChartSpec, snapshot: &TableSnapshot, settings: &Settings) -> Result<ChartData, ChartError> {
    let column = |name: &str| {
        snapshot
            .column(name)
            .map(|(_, d)| d)
            .ok_or_else(|| ChartError::SpecSchemaMismatch(name.to_string()))
    };
    for f in spec.fields() {
        column(f)?;
    }
    let rows = snapshot.row_count;
    let groups: Vec<Option<String>> = match &spec.color {
        Some(c) => {
            let raw = labels(column(c.name())?);
            capped_labels(&raw, settings.categorical_cap)
                .into_iter()
                .map(|g| Some(g.unwrap_or_else(|| NULL_GROUP.to_string())))
                .collect()
        }
        None => vec![None; rows],
    };
    let mut group_order: Vec<Option<String>> = groups.clone();
    group_order.sort();
    group_order.dedup();
    if group_order.is_empty() && spec.color.is_none() {
        group_order.push(None);
    }

    let x = column(spec.x.name()).ok();
    let series = match spec.mark {
        Mark::Histogram if !numeric_like(x.expect("checked")) => {
            // text that is not numbers: counted per category instead
            let xs = capped_labels(&labels(x.expect("checked")), settings.categorical_cap);
            count_series(&xs, &groups, &group_order)
        }
        Mark::Histogram => {
            let xs = numeric_view(x.expect("checked"));
            let all: Vec<f64> = xs.iter().flatten().copied().collect();
            let edges = bin_edges(&all, settings.bins);
            group_order
                .iter()
                .map(|g| {
                    let mut counts = vec![0usize; edges.len().saturating_sub(1)];
                    for (v, gr) in xs.iter().zip(&groups) {
                        if let (Some(v), true) = (v, gr == g) {
                            counts[bin_index(*v, &edges)] += 1;
                        }
                    }
                    Series {
                        group: g.clone(),
                        points: counts
                            .iter()
                            .enumerate()
                            .map(|(i, c)| DataPoint {
                                key: DataKey::Bin { lo: edges[i], hi: edges[i + 1] },
                                value: *c as f64,
                            })
                            .collect(),
                    }
                })
                .collect()
        }
        Mark::Bar => {
            let xs = capped_labels(&labels(x.expect("checked")), settings.categorical_cap);
            let ys = if spec.y.is_count() { None } else { Some(numeric_view(column(spec.y.name())?)) };
            group_order
                .iter()
                .map(|g| {
                    let rows_in = (0..rows).filter(|&r| &groups[r] == g && xs[r].is_some());
                    let points = match &ys {
                        None => label_counts(rows_in.map(|r| xs[r].clone().unwrap_or_default())),
                        Some(ys) => {
                            let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
                            let valid: Vec<usize> = rows_in.filter(|&r| ys[r].is_some()).collect();
                            for &r in &valid {
                                let e = acc.entry(xs[r].clone().unwrap_or_default()).or_default();
                                e.0 += ys[r].unwrap_or_default();
                                e.1 += 1;
                            }
                            ordered_counts(valid.iter().map(|&r| xs[r].clone().unwrap_or_default()))
                                .into_iter()
                                .map(|(k, _)| {
                                    let (sum, n) = acc[&k];
                                    let value = if spec.y.aggregate == Some(Aggregate::Sum) { sum } else { sum / n as f64 };
                                    DataPoint { key: DataKey::Label(k), value }
                                })
                                .collect()
                        }
                    };
                    Series { group: g.clone(), points }
                })
                .collect()
        }
        Mark::Scatter => {
            let xs = numeric_view(x.expect("checked"));
            let ys = numeric_view(column(spec.y.name())?);
            let mut complete: Vec<usize> = (0..rows).filter(|&r| xs[r].is_some() && ys[r].is_some()).collect();
            if complete.len() > settings.scatter_cap {
                let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
                let mut picked = index::sample(&mut rng, complete.len(), settings.scatter_cap).into_vec();
                picked.sort_unstable();
                complete = picked.into_iter().map(|i| complete[i]).collect();
            }
            group_order
                .iter()
                .map(|g| Series {
                    group: g.clone(),
                    points: complete
                        .iter()
                        .filter(|&&r| &groups[r] == g)
                        .map(|&r| DataPoint { key: DataKey::Num(xs[r].unwrap_or_default()), value: ys[r].unwrap_or_default() })
                        .collect(),
                })
                .collect()
        }
        Mark::Line => {
            let xd = x.expect("checked");
            let ts = xd.temporal().unwrap_or_else(|| numeric_view(xd));
            let ys = numeric_view(column(spec.y.name())?);
            group_order
                .iter()
                .map(|g| {
                    let mut points: Vec<DataPoint> = (0..rows)
                        .filter(|&r| &groups[r] == g)
                        .filter_map(|r| Some(DataPoint { key: DataKey::Num(ts[r]?), value: ys[r]? }))
                        .collect();
                    points.sort_by(|a, b| match (&a.key, &b.key) {
                        (DataKey::Num(p), DataKey::Num(q)) => p.total_cmp(q).then(a.value.total_cmp(&b.value)),
                        _ => std::cmp::Ordering::Equal,
                    });
                    Series { group: g.clone(), points }
                })
                .collect()
        }
        Mark::Heatmap => {
            let xs = capped_labels(&labels(x.expect("checked")), settings.categorical_cap);
            let ys = capped_labels(&labels(column(spec.y.name())?), settings.categorical_cap);
            let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
            for r in 0..rows {
                if let (Some(a), Some(b)) = (&xs[r], &ys[r]) {
                    *counts.entry((a.clone(), b.clone())).or_default() += 1;
                }
            }
            vec![Series {
                group: None,
                points: counts
                    .into_iter()
                    .map(|((a, b), c)| DataPoint { key: DataKey::Pair(a, b), value: c as f64 })
                    .collect(),
            }]
        }
    };
    Ok(ChartData { series })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: Vec<(&str, ColumnData)>) -> TableSnapshot {
        TableSnapshot::new(cols.into_iter().map(|(n, d)| (n.to_string(), d)).collect())
    }

    #[test]
    fn spec_json_shape_and_validation() {
        let spec = ChartSpec::histogram("mpg");
        let v = serde_json::to_value(&spec).unwrap();
        assert_eq!(
            v,
            json!({"mark": "histogram", "encoding": {
                "x": {"field": "mpg", "type": "quantitative", "bin": true},
                "y": {"type": "quantitative", "aggregate": "count"}}})
        );
        let back: ChartSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, spec);
        let bad = json!({"mark": "scatter", "encoding": {"x": {"field": "a", "type": "nominal"}, "y": {"field": "b", "type": "quantitative"}}});
        assert!(serde_json::from_value::<ChartSpec>(bad).is_err());
        assert_eq!(ChartSpec::heatmap("a", "b").to_vega_lite()["mark"], "rect");
        assert_eq!(ChartSpec::bar_count("Type").to_string(), "bar(x=Type, y=COUNT)");
    }

    #[test]
    fn every_constructor_is_valid() {
        for s in [
            ChartSpec::histogram("a"),
            ChartSpec::bar_count("a"),
            ChartSpec::bar_aggregate("a", "b", Aggregate::Mean),
            ChartSpec::scatter("a", "b"),
            ChartSpec::line("t", "b"),
            ChartSpec::heatmap("a", "b"),
            ChartSpec::scatter("a", "b").with_color("c"),
        ] {
            s.validate().unwrap();
        }
        assert!(ChartSpec::bar_count("a").with_color("a").validate().is_err());
    }

    #[test]
    fn bar_counts_and_means() {
        let s = Settings::default();
        let t = table(vec![
            ("Type", ColumnData::Str(vec![Some("Free".into()), Some("Paid".into()), Some("Free".into()), None])),
            ("v", ColumnData::Float(vec![Some(1.0), Some(4.0), Some(3.0), Some(9.0)])),
        ]);
        let d = render_data(&ChartSpec::bar_count("Type"), &t, &s).unwrap();
        assert_eq!(
            d.series[0].points,
            vec![
                DataPoint { key: DataKey::Label("Free".into()), value: 2.0 },
                DataPoint { key: DataKey::Label("Paid".into()), value: 1.0 },
            ]
        );
        let d = render_data(&ChartSpec::bar_aggregate("Type", "v", Aggregate::Mean), &t, &s).unwrap();
        assert_eq!(d.series[0].points[0].value, 2.0);
        assert!(matches!(
            render_data(&ChartSpec::bar_count("nope"), &t, &s),
            Err(ChartError::SpecSchemaMismatch(_))
        ));
    }

    #[test]
    fn histogram_with_color_shares_edges() {
        let s = Settings::default();
        let t = table(vec![
            ("x", ColumnData::Int((0..10).map(Some).collect())),
            ("g", ColumnData::Str((0..10).map(|i| Some(if i < 5 { "a" } else { "b" }.to_string())).collect())),
        ]);
        let d = render_data(&ChartSpec::histogram("x").with_color("g"), &t, &s).unwrap();
        assert_eq!(d.series.len(), 2);
        assert_eq!(d.total(), 10.0);
        assert_eq!(d.series[0].points.len(), 10);
    }

    #[test]
    fn scatter_sampling_is_deterministic() {
        let mut s = Settings::default();
        s.scatter_cap = 50;
        let t = table(vec![
            ("x", ColumnData::Int((0..500).map(Some).collect())),
            ("y", ColumnData::Int((0..500).map(|i| Some(i * 2)).collect())),
        ]);
        let a = render_data(&ChartSpec::scatter("x", "y"), &t, &s).unwrap();
        let b = render_data(&ChartSpec::scatter("x", "y"), &t, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.series[0].points.len(), 50);
    }

    #[test]
    fn empty_table_renders_empty_series() {
        let t = table(vec![("x", ColumnData::Float(Vec::new()))]);
        let d = render_data(&ChartSpec::histogram("x"), &t, &Settings::default()).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn change_detection_tolerance() {
        let mk = |v: f64| ChartData {
            series: vec![Series { group: None, points: vec![DataPoint { key: DataKey::Label("a".into()), value: v }] }],
        };
        assert!(!mk(1.0).differs(&mk(1.0 + 1e-9), 1e-6, 1e-9));
        assert!(mk(1.0).differs(&mk(1.1), 1e-6, 1e-9));
        assert!(!mk(0.0).differs(&mk(1e-10), 1e-6, 1e-9));
    }
}
