mod common;

use std::collections::BTreeMap;

use ggpu_core::design::{build_reference_design, Partition, Variant};
use ggpu_core::tech::TechParams;
use ggpu_core::timing::*;
use ggpu_core::transforms::{apply, TransformKind};
use ggpu_core::Error;
use proptest::prelude::*;

/// Exhaustive longest source-to-sink path.
fn brute_longest(n: usize, edges: &[(usize, usize, f64)]) -> f64 {
    fn walk(v: usize, edges: &[(usize, usize, f64)]) -> f64 {
        edges
            .iter()
            .filter(|e| e.0 == v)
            .map(|e| e.2 + walk(e.1, edges))
            .fold(0.0, f64::max)
    }
    (0..n)
        .filter(|&v| !edges.iter().any(|e| e.1 == v))
        .map(|v| walk(v, edges))
        .fold(0.0, f64::max)
}

fn dag() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (2usize..=12).prop_flat_map(|n| {
        let edge = (0..n, 0..n, 0.0f64..5.0).prop_filter_map("forward", |(a, b, d)| {
            (a < b).then_some((a, b, (d * 1000.0).round() / 1000.0))
        });
        (Just(n), prop::collection::vec(edge, 1..30))
    })
}

proptest! {
    #[test]
    fn longest_path_matches_exhaustive_search((n, edges) in dag()) {
        let mut g = TimingGraph::new();
        for i in 0..n {
            g.add_node(&format!("n{i:02}"));
        }
        for &(a, b, d) in &edges {
            g.add_edge(&format!("n{a:02}"), &format!("n{b:02}"), d, None);
        }
        let cp = g.critical_path().unwrap();
        prop_assert!((cp.total_delay_ns - brute_longest(n, &edges)).abs() < 1e-9);
        let sum: f64 = cp.edges.iter().map(|e| e.delay_ns).sum();
        prop_assert!((sum - cp.total_delay_ns).abs() < 1e-12);
        for w in cp.edges.windows(2) {
            prop_assert_eq!(&w[0].to, &w[1].from);
        }
    }
}

#[test]
fn baseline_critical_path_is_two_nanoseconds_from_a_memory() {
    let p = TechParams::shipped();
    for c in [1, 4, 8] {
        let d = build_reference_design(c, Variant::Baseline).unwrap();
        let cp = build_timing_graph(&d, &p, None).unwrap().critical_path().unwrap();
        assert!((cp.total_delay_ns - 2.0).abs() < 1e-6, "{}", cp.total_delay_ns);
        assert!(cp.contains_memory);
        assert!(cp.launching_memory().is_some());
        assert!((fmax_of(cp.total_delay_ns) - 500.0).abs() < 1e-3);
    }
}

#[test]
fn parallel_edges_keep_the_slower_arc() {
    let mut g = TimingGraph::new();
    g.add_edge("a", "b", 1.0, Some("fast".into()));
    g.add_edge("a", "b", 1.7, Some("slow".into()));
    g.add_edge("b", "c", 0.3, None);
    let cp = g.critical_path().unwrap();
    assert!((cp.total_delay_ns - 2.0).abs() < 1e-12);
    assert_eq!(cp.edges[0].net.as_deref(), Some("slow"));
    assert!((g.fmax().unwrap() - 500.0).abs() < 1e-9);
}

#[test]
fn equal_delay_diamond_takes_the_lexicographically_smaller_branch() {
    let mut g = TimingGraph::new();
    g.add_edge("s", "y", 1.0, None);
    g.add_edge("s", "x", 1.0, None);
    g.add_edge("x", "t", 0.5, None);
    g.add_edge("y", "t", 0.5, None);
    assert_eq!(g.critical_path().unwrap().nodes, ["s", "x", "t"]);
    g.add_edge("b", "t", 1.5, None);
    assert_eq!(g.critical_path().unwrap().nodes, ["b", "t"]);
}

#[test]
fn fmax_examples() {
    assert!((fmax_of(2.0) - 500.0).abs() < 1e-12);
    assert!((fmax_of(1.0 / 0.667) - 667.0).abs() < 1e-9);
    assert!((fmax_of(1.694_915_254) - 590.0).abs() < 1e-6);
}

#[test]
fn cycle_is_structural() {
    let mut g = TimingGraph::new();
    g.add_edge("a", "b", 1.0, None);
    g.add_edge("b", "c", 1.0, None);
    g.add_edge("c", "a", 1.0, None);
    assert!(matches!(g.critical_path(), Err(Error::Structural(_))));
    assert!(matches!(TimingGraph::new().critical_path(), Err(Error::State(_))));
}

#[test]
fn floorplan_is_disjoint_and_spreads_with_cu_count() {
    let p = TechParams::shipped();
    let mut spread = Vec::new();
    for c in 1..=8 {
        let d = build_reference_design(c, Variant::Baseline).unwrap();
        let fp = layout_floorplan(&d, &p).unwrap();
        fp.validate().unwrap();
        assert_eq!(fp.rects.len() as u32, c + 2);
        let far = (0..c)
            .map(|k| fp.distance(Partition::Cu(k), Partition::MemController).unwrap())
            .fold(0.0, f64::max);
        spread.push(far);
        assert!(matches!(fp.distance(Partition::Cu(c), Partition::Top), Err(Error::Lookup(_))));
    }
    assert!(spread[7] > spread[3] && spread[3] > spread[0]);
    for w in spread.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
}

#[test]
fn wire_model_never_shortens_the_critical_path() {
    let p = TechParams::shipped();
    let none = BTreeMap::new();
    for d in common::references().values() {
        let plain = analyze(d, &p, false, &none).unwrap();
        let wired = analyze(d, &p, true, &none).unwrap();
        assert!(wired.critical.total_delay_ns >= plain.critical.total_delay_ns - DELAY_EPS);
        let zero = TechParams { kappa: 0.0, ..p };
        let flat = analyze(d, &zero, true, &none).unwrap();
        assert!((flat.critical.total_delay_ns - plain.critical.total_delay_ns).abs() < 1e-12);
    }
}

#[test]
fn splitting_an_off_path_memory_keeps_fmax() {
    let p = TechParams::shipped();
    let d = build_reference_design(2, Variant::Baseline).unwrap();
    let before = build_timing_graph(&d, &p, None).unwrap().fmax().unwrap();
    let nd = apply(&d, &TransformKind::SplitWords { mem_id: "cu1.spm3".into(), fan: 2 }).unwrap();
    let after = build_timing_graph(&nd, &p, None).unwrap().fmax().unwrap();
    assert!((before - after).abs() < 1e-9);
}

#[test]
fn delay_overrides_are_validated_and_applied() {
    let p = TechParams::shipped();
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    let mut o = BTreeMap::new();
    o.insert("cu0.spm0".to_string(), 3.5);
    let a = analyze(&d, &p, false, &o).unwrap();
    assert_eq!(a.critical.launching_memory(), Some("cu0.spm0"));
    assert!(a.critical.total_delay_ns > 3.5);
    o.insert("nope".to_string(), 1.0);
    assert!(matches!(analyze(&d, &p, false, &o), Err(Error::Lookup(_))));
    o.clear();
    o.insert("cu0.spm0".to_string(), -1.0);
    assert!(matches!(analyze(&d, &p, false, &o), Err(Error::Range(_))));
}

#[test]
fn report_lists_cumulative_delay() {
    let p = TechParams::shipped();
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    let cp = build_timing_graph(&d, &p, None).unwrap().critical_path().unwrap();
    let report = timing_report(&cp);
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("from,to,net,delay_ns,cumulative_ns"));
    let last = lines.last().unwrap();
    assert!(last.ends_with(",2.0000"), "{last}");
    assert_eq!(report.lines().count(), cp.edges.len() + 1);
}
