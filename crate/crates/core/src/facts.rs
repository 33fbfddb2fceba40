//! Data facts: distributions, correlations and trends.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Settings;
use crate::snapshot::{ColumnProfile, TableSnapshot};

/// Label of the bucket holding categories beyond the cap.
pub const OTHER_BUCKET: &str = "(other)";
pub const DISTRIBUTION_SCORE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactError {
    #[error("column {0} not found")]
    MissingColumn(String),
    #[error("column {0} has no non-null values")]
    AllNullColumn(String),
    #[error("column {0} has zero variance")]
    DegenerateColumn(String),
    #[error("column {0} is not numeric")]
    NotNumeric(String),
    #[error("column {0} is not temporal")]
    NotTemporal(String),
    #[error("fewer than 3 complete rows for {0} and {1}")]
    TooFewRows(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactKind {
    Distribution,
    Correlation,
    Trend,
}

impl FactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FactKind::Distribution => "distribution",
            FactKind::Correlation => "correlation",
            FactKind::Trend => "trend",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFact {
    pub kind: FactKind,
    /// One column, or (value, category) for an aggregated distribution,
    /// (a, b) for a correlation, (time, value) for a trend.
    pub columns: Vec<String>,
    pub score: f64,
    pub node: String,
    /// Signed coefficient for correlation and trend facts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HistogramData {
    /// `edges.len() == counts.len() + 1`; the last bin is closed.
    Bins { edges: Vec<f64>, counts: Vec<usize> },
    Categories { labels: Vec<String>, counts: Vec<usize> },
}

impl HistogramData {
    pub fn total(&self) -> usize {
        match self {
            HistogramData::Bins { counts, .. } | HistogramData::Categories { counts, .. } => counts.iter().sum(),
        }
    }
}

/// Bin edges over [min, max]: `bins + 1` equal-width edges, or `[min, max]`
/// when all values are equal. Empty for no values.
pub fn bin_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let bins = bins.max(1);
    let Some(min) = values.iter().copied().reduce(f64::min) else {
        return Vec::new();
    };
    let max = values.iter().copied().fold(min, f64::max);
    if min == max {
        return vec![min, max];
    }
    let width = (max - min) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| min + i as f64 * width).collect();
    edges.push(max);
    edges
}

/// Bin of `x`: bins are right-open except the last, which is closed.
/// Values outside the edges clamp to the first or last bin.
pub fn bin_index(x: f64, edges: &[f64]) -> usize {
    let bins = edges.len().saturating_sub(1).max(1);
    let (min, max) = (edges[0], edges[edges.len() - 1]);
    if max <= min {
        return 0;
    }
    let width = (max - min) / bins as f64;
    let mut idx = (((x - min) / width).floor().max(0.0) as usize).min(bins - 1);
    // floating error can put x on the wrong side of an edge
    while idx > 0 && x < edges[idx] {
        idx -= 1;
    }
    while idx + 1 < bins && x >= edges[idx + 1] {
        idx += 1;
    }
    idx
}

/// Equal-width bins over [min, max]; a single bin when min = max.
pub fn bin_values(values: &[f64], bins: usize) -> HistogramData {
    let edges = bin_edges(values, bins);
    if edges.is_empty() {
        return HistogramData::Bins { edges, counts: Vec::new() };
    }
    let mut counts = vec![0usize; edges.len() - 1];
    for &x in values {
        counts[bin_index(x, &edges)] += 1;
    }
    HistogramData::Bins { edges, counts }
}

/// Counts per label, largest first (ties by label), with everything past
/// `cap` folded into one bucket.
pub fn count_categories<'a>(labels: impl IntoIterator<Item = &'a str>, cap: usize) -> HistogramData {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut sorted: Vec<(&str, usize)> = counts.into_iter().collect();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let rest: usize = sorted.iter().skip(cap).map(|(_, c)| c).sum();
    sorted.truncate(cap);
    let mut labels: Vec<String> = sorted.iter().map(|(l, _)| l.to_string()).collect();
    let mut counts: Vec<usize> = sorted.iter().map(|(_, c)| *c).collect();
    if rest > 0 {
        labels.push(OTHER_BUCKET.to_string());
        counts.push(rest);
    }
    HistogramData::Categories { labels, counts }
}

pub fn mine_distribution(
    snapshot: &TableSnapshot,
    column: &str,
    node: &str,
    settings: &Settings,
) -> Result<(DataFact, HistogramData), FactError> {
    let (decl, data) = snapshot.column(column).ok_or_else(|| FactError::MissingColumn(column.into()))?;
    let hist = if decl.dtype.is_numeric() {
        let values: Vec<f64> = data.numeric().unwrap_or_default().into_iter().flatten().collect();
        if values.is_empty() {
            return Err(FactError::AllNullColumn(column.into()));
        }
        bin_values(&values, settings.bins)
    } else {
        let labels: Vec<String> = (0..data.len()).filter_map(|r| data.label(r)).collect();
        if labels.is_empty() {
            return Err(FactError::AllNullColumn(column.into()));
        }
        count_categories(labels.iter().map(String::as_str), settings.categorical_cap)
    };
    let fact = DataFact {
        kind: FactKind::Distribution,
        columns: vec![column.to_string()],
        score: DISTRIBUTION_SCORE,
        node: node.to_string(),
        r: None,
    };
    Ok((fact, hist))
}

/// Pearson r over pairwise-complete rows, single pass.
pub fn pearson(xs: &[Option<f64>], ys: &[Option<f64>]) -> Option<f64> {
    let (mut n, mut mx, mut my, mut sxx, mut syy, mut sxy) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for (x, y) in xs.iter().zip(ys) {
        let (Some(x), Some(y)) = (x, y) else { continue };
        n += 1.0;
        let (dx, dy) = (x - mx, y - my);
        mx += dx / n;
        my += dy / n;
        sxx += dx * (x - mx);
        syy += dy * (y - my);
        // symmetric form so that r(x, y) == r(y, x) bit for bit
        sxy += (dx * dy) * ((n - 1.0) / n);
    }
    if n < 2.0 || sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn complete_pairs(xs: &[Option<f64>], ys: &[Option<f64>]) -> usize {
    xs.iter().zip(ys).filter(|(x, y)| x.is_some() && y.is_some()).count()
}

fn has_variance(xs: &[Option<f64>], ys: &[Option<f64>], which: usize) -> bool {
    let mut first = None;
    for (x, y) in xs.iter().zip(ys) {
        if let (Some(x), Some(y)) = (x, y) {
            let v = if which == 0 { *x } else { *y };
            match first {
                None => first = Some(v),
                Some(f) if f != v => return true,
                _ => {}
            }
        }
    }
    false
}

fn numeric_column(snapshot: &TableSnapshot, name: &str) -> Result<Vec<Option<f64>>, FactError> {
    let (_, data) = snapshot.column(name).ok_or_else(|| FactError::MissingColumn(name.into()))?;
    data.numeric().ok_or_else(|| FactError::NotNumeric(name.into()))
}

fn correlate(a: &str, b: &str, xs: &[Option<f64>], ys: &[Option<f64>]) -> Result<f64, FactError> {
    if complete_pairs(xs, ys) < 3 {
        return Err(FactError::TooFewRows(a.into(), b.into()));
    }
    if !has_variance(xs, ys, 0) {
        return Err(FactError::DegenerateColumn(a.into()));
    }
    if !has_variance(xs, ys, 1) {
        return Err(FactError::DegenerateColumn(b.into()));
    }
    pearson(xs, ys).ok_or_else(|| FactError::DegenerateColumn(a.into()))
}

/// A correlation fact when |r| reaches the threshold, else `None`.
pub fn mine_correlation(
    snapshot: &TableSnapshot,
    a: &str,
    b: &str,
    node: &str,
    settings: &Settings,
) -> Result<Option<DataFact>, FactError> {
    let xs = numeric_column(snapshot, a)?;
    let ys = numeric_column(snapshot, b)?;
    let r = correlate(a, b, &xs, &ys)?;
    Ok((r.abs() >= settings.fact_threshold).then(|| DataFact {
        kind: FactKind::Correlation,
        columns: vec![a.to_string(), b.to_string()],
        score: r.abs().min(1.0),
        node: node.to_string(),
        r: Some(r),
    }))
}

/// 1-based ranks, ties get the average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Trend of `value_col` over `temporal_col`: |r| between time rank and value rank.
pub fn mine_trend(
    snapshot: &TableSnapshot,
    temporal_col: &str,
    value_col: &str,
    node: &str,
    settings: &Settings,
) -> Result<Option<DataFact>, FactError> {
    let (_, tdata) = snapshot
        .column(temporal_col)
        .ok_or_else(|| FactError::MissingColumn(temporal_col.into()))?;
    let times = tdata.temporal().ok_or_else(|| FactError::NotTemporal(temporal_col.into()))?;
    let values = numeric_column(snapshot, value_col)?;
    let (ts, vs): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&values)
        .filter_map(|(t, v)| Some(((*t)?, (*v)?)))
        .unzip();
    // rank correlation: any strictly monotone series scores 1
    let ranks: Vec<Option<f64>> = average_ranks(&ts).into_iter().map(Some).collect();
    let vs: Vec<Option<f64>> = average_ranks(&vs).into_iter().map(Some).collect();
    let r = correlate(temporal_col, value_col, &ranks, &vs)?;
    Ok((r.abs() >= settings.fact_threshold).then(|| DataFact {
        kind: FactKind::Trend,
        columns: vec![temporal_col.to_string(), value_col.to_string()],
        score: r.abs().min(1.0),
        node: node.to_string(),
        r: Some(r),
    }))
}

fn variance(values: &[Option<f64>]) -> f64 {
    let xs: Vec<f64> = values.iter().flatten().copied().collect();
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Every fact of one node, in a deterministic order.
pub fn mine_facts(
    snapshot: &TableSnapshot,
    profiles: &[ColumnProfile],
    node: &str,
    settings: &Settings,
) -> Vec<DataFact> {
    let mut facts = Vec::new();
    let colors: Vec<&ColumnProfile> = profiles
        .iter()
        .filter(|p| p.is_color_candidate(settings.categorical_cap))
        .collect();
    for p in profiles {
        if p.is_temporal {
            continue;
        }
        let Ok((fact, _)) = mine_distribution(snapshot, &p.name, node, settings) else {
            continue;
        };
        facts.push(fact);
        if p.dtype.is_numeric() {
            for partner in colors.iter().filter(|c| c.name != p.name) {
                facts.push(DataFact {
                    kind: FactKind::Distribution,
                    columns: vec![p.name.clone(), partner.name.clone()],
                    score: DISTRIBUTION_SCORE,
                    node: node.to_string(),
                    r: None,
                });
            }
        }
    }

    let mut numeric: Vec<(&str, Vec<Option<f64>>, f64)> = profiles
        .iter()
        .filter(|p| p.dtype.is_numeric())
        .filter_map(|p| {
            let values = snapshot.column(&p.name)?.1.numeric()?;
            let var = variance(&values);
            Some((p.name.as_str(), values, var))
        })
        .collect();
    numeric.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(b.0)));
    numeric.truncate(settings.numeric_pair_cap);
    // restore schema order for stable pair naming
    numeric.sort_by_key(|(name, _, _)| snapshot.index_of(name));
    for i in 0..numeric.len() {
        for j in i + 1..numeric.len() {
            let (a, xs, _) = &numeric[i];
            let (b, ys, _) = &numeric[j];
            if let Ok(r) = correlate(a, b, xs, ys) {
                if r.abs() >= settings.fact_threshold {
                    facts.push(DataFact {
                        kind: FactKind::Correlation,
                        columns: vec![a.to_string(), b.to_string()],
                        score: r.abs().min(1.0),
                        node: node.to_string(),
                        r: Some(r),
                    });
                }
            }
        }
    }

    for t in profiles.iter().filter(|p| p.is_temporal) {
        for v in profiles.iter().filter(|p| p.dtype.is_numeric()) {
            if let Ok(Some(fact)) = mine_trend(snapshot, &t.name, &v.name, node, settings) {
                facts.push(fact);
            }
        }
    }
    facts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::ColumnData;

    fn table(cols: Vec<(&str, ColumnData)>) -> TableSnapshot {
        TableSnapshot::new(cols.into_iter().map(|(n, d)| (n.to_string(), d)).collect())
    }

    #[test]
    fn uniform_values_fill_each_bin_once() {
        let values: Vec<f64> = (0..10).map(f64::from).collect();
        match bin_values(&values, 10) {
            HistogramData::Bins { counts, edges } => {
                assert_eq!(counts, vec![1; 10]);
                assert_eq!(edges.len(), 11);
                assert_eq!(*edges.last().unwrap(), 9.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_column_single_bin() {
        assert_eq!(
            bin_values(&[3.0; 7], 10),
            HistogramData::Bins { edges: vec![3.0, 3.0], counts: vec![7] }
        );
    }

    #[test]
    fn category_counts_and_cap() {
        let mut labels = vec!["Free"; 900];
        labels.extend(vec!["Paid"; 100]);
        labels.extend(vec!["0"; 50]);
        assert_eq!(
            count_categories(labels, 20),
            HistogramData::Categories {
                labels: vec!["Free".into(), "Paid".into(), "0".into()],
                counts: vec![900, 100, 50]
            }
        );
        let many: Vec<String> = (0..25).map(|i| format!("c{i:02}")).collect();
        let h = count_categories(many.iter().map(String::as_str), 20);
        match &h {
            HistogramData::Categories { labels, counts } => {
                assert_eq!(labels.len(), 21);
                assert_eq!(labels[20], OTHER_BUCKET);
                assert_eq!(counts[20], 5);
            }
            _ => unreachable!(),
        }
        assert_eq!(h.total(), 25);
    }

    #[test]
    fn perfect_correlations() {
        let s = Settings::default();
        let x: Vec<Option<i64>> = (0..20).map(Some).collect();
        let t = table(vec![
            ("x", ColumnData::Int(x.clone())),
            ("y", ColumnData::Float(x.iter().map(|v| v.map(|v| 2.0 * v as f64)).collect())),
            ("z", ColumnData::Float(x.iter().map(|v| v.map(|v| -3.0 * v as f64 + 7.0)).collect())),
            ("k", ColumnData::Int(vec![Some(1); 20])),
        ]);
        let f = mine_correlation(&t, "x", "y", "n", &s).unwrap().unwrap();
        assert!((f.score - 1.0).abs() < 1e-12);
        let f = mine_correlation(&t, "x", "z", "n", &s).unwrap().unwrap();
        assert!((f.r.unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(mine_correlation(&t, "x", "k", "n", &s), Err(FactError::DegenerateColumn("k".into())));
    }

    #[test]
    fn trend_on_increasing_series() {
        let s = Settings::default();
        let dates: Vec<Option<String>> = (1..=9).map(|d| Some(format!("2020-01-0{d}"))).collect();
        let t = table(vec![
            ("date", ColumnData::Datetime(dates)),
            ("v", ColumnData::Float((1..=9).map(|i| Some(f64::from(i * i))).collect())),
            ("c", ColumnData::Float(vec![Some(1.0); 9])),
        ]);
        let f = mine_trend(&t, "date", "v", "n", &s).unwrap().unwrap();
        assert!((f.score - 1.0).abs() < 1e-12);
        assert!(mine_trend(&t, "date", "c", "n", &s).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn all_null_column() {
        let t = table(vec![("a", ColumnData::Float(vec![None, None]))]);
        assert!(matches!(
            mine_distribution(&t, "a", "n", &Settings::default()),
            Err(FactError::AllNullColumn(_))
        ));
    }
}
