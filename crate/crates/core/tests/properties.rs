use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use noteflow_core::chart::{render_data, Aggregate, ChartSpec, Mark};
use noteflow_core::classify::ColumnMap;
use noteflow_core::config::Settings;
use noteflow_core::facts::{bin_values, pearson, HistogramData};
use noteflow_core::graph::NodeId;
use noteflow_core::parser::parse_statement;
use noteflow_core::recommend::{
    dedup_merge_tags, filter_candidates, rank, CandidateFilter, Reason, Recommendation, RecommendationTag,
};
use noteflow_core::facts::FactKind;
use noteflow_core::snapshot::{ColumnData, TableSnapshot};
use noteflow_core::trace::{substitute_encoding, Direction, Substituted};
use proptest::prelude::*;

fn arb_spec() -> impl Strategy<Value = ChartSpec> {
    let col = prop::sample::select(vec!["a", "b", "c", "d"]);
    (0..6u8, col.clone(), col.clone(), prop::option::of(prop::sample::select(vec!["g", "h"]))).prop_map(
        |(m, x, y, color)| {
            let base = match m {
                0 => ChartSpec::histogram(x),
                1 => ChartSpec::bar_count(x),
                2 => ChartSpec::bar_aggregate(x, y, Aggregate::Sum),
                3 => ChartSpec::scatter(x, y),
                4 => ChartSpec::line(x, y),
                _ => ChartSpec::heatmap(x, y),
            };
            match color {
                Some(c) if base.mark != Mark::Heatmap => base.with_color(c),
                _ => base,
            }
        },
    )
}

fn arb_tag() -> impl Strategy<Value = RecommendationTag> {
    prop_oneof![
        (prop::sample::select(vec!["fill", "replace", "filter", "mutate"]), 1..6u32, 1..3u32).prop_map(|(t, e, l)| {
            RecommendationTag {
                reason: Reason::Transformation,
                transform: Some(t.to_string()),
                fact_kind: None,
                edge_epoch: Some(e),
                edge_line: Some(l),
                edge_src: None,
                score: None,
                columns: Vec::new(),
            }
        }),
        (0..3u8, 0..5u8).prop_map(|(k, s)| {
            let kind = [FactKind::Distribution, FactKind::Correlation, FactKind::Trend][k as usize];
            RecommendationTag {
                reason: Reason::Fact,
                transform: None,
                fact_kind: Some(kind),
                edge_epoch: None,
                edge_line: None,
                edge_src: None,
                score: Some(f64::from(s) / 4.0),
                columns: vec!["a".into()],
            }
        }),
    ]
}

fn arb_candidates(max: usize) -> impl Strategy<Value = Vec<Recommendation>> {
    let node = prop::sample::select(vec![NodeId::new("df", 2, 1), NodeId::new("df2", 2, 2)]);
    prop::collection::vec((node, arb_spec(), prop::collection::vec(arb_tag(), 1..4)), 0..=max).prop_map(|raw| {
        let recs = raw
            .into_iter()
            .flat_map(|(n, spec, tags)| tags.into_iter().map(move |t| Recommendation::new(&n, spec.clone(), t)))
            .collect();
        dedup_merge_tags(recs)
    })
}

/// Independent comparator: criteria recomputed straight from the tags.
fn oracle_cmp(a: &Recommendation, b: &Recommendation, operated: &BTreeSet<String>) -> Ordering {
    fn key(r: &Recommendation, operated: &BTreeSet<String>) -> (u8, (u32, u32), u8, u8, usize, f64) {
        let mut has_t = 0;
        let mut rec = (0, 0);
        let mut dist = 0;
        let mut corr = 0.0f64;
        for t in &r.tags {
            if t.reason == Reason::Transformation {
                has_t = 1;
                rec = rec.max((t.edge_epoch.unwrap(), t.edge_line.unwrap()));
            }
            if t.fact_kind == Some(FactKind::Distribution) {
                dist = 1;
            }
            if r.chart.mark == Mark::Scatter && t.fact_kind == Some(FactKind::Correlation) {
                corr = corr.max(t.score.unwrap());
            }
        }
        let op = u8::from(r.chart.fields().iter().any(|f| operated.contains(*f)));
        (has_t, rec, dist, op, r.tags.len(), corr)
    }
    let (ka, kb) = (key(a, operated), key(b, operated));
    let desc = kb.0.cmp(&ka.0)
        .then(kb.1.cmp(&ka.1))
        .then(kb.2.cmp(&ka.2))
        .then(kb.3.cmp(&ka.3))
        .then(kb.4.cmp(&ka.4))
        .then(kb.5.partial_cmp(&ka.5).unwrap());
    let tb = |r: &Recommendation| {
        (
            r.node.variable.clone(),
            r.node.clone(),
            r.chart.x.field.clone(),
            r.chart.y.field.clone(),
            r.chart.mark,
            r.chart.color.as_ref().and_then(|c| c.field.clone()),
        )
    };
    desc.then_with(|| tb(a).cmp(&tb(b))).then_with(|| a.chart.cmp(&b.chart)).then_with(|| a.tags.cmp(&b.tags))
}

/// Position of each element = number of elements that beat it.
fn oracle_rank(cands: &[Recommendation], operated: &BTreeSet<String>) -> Vec<(NodeId, ChartSpec)> {
    let mut slots: Vec<Option<(NodeId, ChartSpec)>> = vec![None; cands.len()];
    for a in cands {
        let pos = cands.iter().filter(|b| oracle_cmp(b, a, operated) == Ordering::Less).count();
        slots[pos] = Some((a.node.clone(), a.chart.clone()));
    }
    slots.into_iter().map(|s| s.expect("total order")).collect()
}

fn operated_map() -> (BTreeMap<NodeId, BTreeSet<String>>, BTreeSet<String>) {
    let ops: BTreeSet<String> = ["b".to_string()].into();
    let map = [NodeId::new("df", 2, 1), NodeId::new("df2", 2, 2)].into_iter().map(|n| (n, ops.clone())).collect();
    (map, ops)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rank_matches_pairwise_oracle(cands in arb_candidates(20)) {
        let (map, ops) = operated_map();
        let got: Vec<(NodeId, ChartSpec)> = rank(cands.clone(), &map).into_iter().map(|r| (r.node, r.chart)).collect();
        prop_assert_eq!(got, oracle_rank(&cands, &ops));
    }

    #[test]
    fn rank_is_permutation_invariant(cands in arb_candidates(20), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (map, _) = operated_map();
        let mut shuffled = cands.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(rank(cands, &map), rank(shuffled, &map));
    }

    #[test]
    fn merge_is_idempotent_and_keeps_distinct_tags(cands in arb_candidates(12)) {
        let again = dedup_merge_tags(cands.clone());
        prop_assert_eq!(&again, &cands);
        let keys: BTreeSet<_> = cands.iter().map(|c| (c.node.clone(), c.chart.clone())).collect();
        prop_assert_eq!(keys.len(), cands.len());
    }

    #[test]
    fn filter_is_a_subsequence(cands in arb_candidates(15), col in prop::sample::select(vec!["a", "b", "g"])) {
        let (map, _) = operated_map();
        let ranked = rank(cands, &map);
        let f = CandidateFilter { columns: Some([col.to_string()].into()), ..Default::default() };
        let sub = filter_candidates(&ranked, &f);
        let mut it = ranked.iter();
        for s in &sub {
            prop_assert!(it.any(|r| r == s));
            prop_assert!(s.chart.encodes(col));
        }
    }

    #[test]
    fn generated_specs_satisfy_mark_rules(spec in arb_spec()) {
        if spec.x.field != spec.y.field || spec.mark == Mark::Histogram || spec.mark == Mark::Bar {
            prop_assert!(spec.validate().is_ok() || spec.color.as_ref().is_some_and(|c| spec.encodes(c.name())));
        }
        let json = serde_json::to_string(&spec).unwrap();
        if spec.validate().is_ok() {
            prop_assert_eq!(serde_json::from_str::<ChartSpec>(&json).unwrap(), spec);
        }
    }

    #[test]
    fn histogram_counts_sum_and_cover(values in prop::collection::vec(prop::option::of(-1e6f64..1e6), 0..200)) {
        let present: Vec<f64> = values.iter().flatten().copied().collect();
        if let HistogramData::Bins { edges, counts } = bin_values(&present, 10) {
            prop_assert_eq!(counts.iter().sum::<usize>(), present.len());
            if !present.is_empty() {
                let min = present.iter().copied().fold(f64::INFINITY, f64::min);
                let max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(edges[0], min);
                prop_assert_eq!(*edges.last().unwrap(), max);
                prop_assert!(edges.windows(2).all(|w| w[0] <= w[1]));
            }
        }
        let t = TableSnapshot::new(vec![("x".into(), ColumnData::Float(values.clone()))]);
        let d = render_data(&ChartSpec::histogram("x"), &t, &Settings::default()).unwrap();
        prop_assert_eq!(d.total() as usize, present.len());
    }

    #[test]
    fn pearson_symmetric_bounded_permutation_invariant(
        pairs in prop::collection::vec((prop::option::of(-100.0f64..100.0), prop::option::of(-100.0f64..100.0)), 3..60),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (xs, ys): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let r = pearson(&xs, &ys);
        prop_assert_eq!(r, pearson(&ys, &xs));
        if let Some(r) = r {
            prop_assert!((-1.0..=1.0).contains(&r));
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (sx, sy): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
            let r2 = pearson(&sx, &sy).unwrap();
            prop_assert!((r - r2).abs() < 1e-9);
        }
    }

    #[test]
    fn schema_diff_covers_both_schemas(
        a in prop::collection::btree_set("[a-f]", 0..6),
        b in prop::collection::btree_set("[a-f]", 0..6),
    ) {
        let (a, b): (Vec<String>, Vec<String>) = (a.into_iter().collect(), b.into_iter().collect());
        prop_assert!(ColumnMap::schema_diff(&a, &b).covers(&a, &b));
    }

    #[test]
    fn bijective_substitution_round_trips(spec in arb_spec(), shift in 0..4usize) {
        let cols = ["a", "b", "c", "d", "g", "h"];
        let renamed: Vec<(String, String)> = cols
            .iter()
            .enumerate()
            .map(|(i, c)| (c.to_string(), if i < 4 { format!("{}2", cols[(i + shift) % 4]) } else { c.to_string() }))
            .collect();
        let map = ColumnMap { pairs: renamed, added: Vec::new(), removed: Vec::new() };
        if let Substituted::Ok { spec: fwd, .. } = substitute_encoding(&spec, &map, true, Direction::Forward) {
            let Substituted::Ok { spec: back, .. } = substitute_encoding(&fwd, &map, true, Direction::Backward) else {
                panic!("backward failed");
            };
            prop_assert_eq!(back, spec);
        }
    }

    #[test]
    fn parsed_statements_are_well_formed(
        target in prop::sample::select(vec!["df", "out", ""]),
        root in prop::sample::select(vec!["df", "pd"]),
        methods in prop::collection::vec(prop::sample::select(vec![
            "dropna()", "fillna(0)", "sort_values('a')", "head(3)", "groupby('k').mean()", "rename(columns={'a': 'b'})",
            "drop_duplicates()", "reset_index()", "astype(int)",
        ]), 0..4),
    ) {
        let mut raw = root.to_string();
        for m in &methods {
            raw.push('.');
            raw.push_str(m);
        }
        if !target.is_empty() {
            raw = format!("{target} = {raw}");
        }
        let ir = parse_statement(&raw, 1, 1);
        prop_assert!(ir.is_parsed(), "{}", raw);
        prop_assert!(!ir.calls.is_empty() || !ir.targets.is_empty());
        if ir.display_expr {
            prop_assert!(ir.targets.is_empty());
        }
    }

    #[test]
    fn node_ids_round_trip(var in "[a-z_][a-z0-9_]{0,12}", c in 0..500u32, l in 1..200u32) {
        let id = NodeId::new(var, c, l);
        prop_assert_eq!(id.to_string().parse::<NodeId>().unwrap(), id);
    }
}
