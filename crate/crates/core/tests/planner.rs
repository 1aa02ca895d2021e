mod common;

use std::collections::BTreeMap;

use ggpu_core::design::{build_reference_design, canonical_schedule, Variant};
use ggpu_core::planner::*;
use ggpu_core::tech::TechParams;
use ggpu_core::timing::build_timing_graph;
use ggpu_core::transforms::replay;
use ggpu_core::Error;

#[test]
fn baseline_recommendation_is_the_first_canonical_step() {
    let p = TechParams::shipped();
    for c in [1, 8] {
        let d = build_reference_design(c, Variant::Baseline).unwrap();
        let r = recommend_next(&d, &p, None).unwrap();
        assert!((r.current_fmax - 500.0).abs() < 1e-3);
        assert_eq!(r.bottleneck.as_deref(), Some("mc.cache_data0"));
        assert_eq!(r.action.as_ref(), canonical_schedule(c, Variant::V590).first());
        assert!(r.predicted_fmax_after >= r.current_fmax - 1e-9);
        assert!(!r.infeasible);
    }
}

#[test]
fn met_target_proposes_nothing() {
    let p = TechParams::shipped();
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    let r = recommend(&d, &p, None, false, Some(500.0)).unwrap();
    assert!(r.action.is_none());
    assert!(!r.infeasible);
}

#[test]
fn measured_delay_moves_the_bottleneck() {
    let p = TechParams::shipped();
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    let mut o = BTreeMap::new();
    o.insert("cu0.spm5".to_string(), 2.5);
    let r = recommend_next(&d, &p, Some(&o)).unwrap();
    assert_eq!(r.bottleneck.as_deref(), Some("cu0.spm5"));
    assert!(r.current_fmax < 500.0);
    assert_eq!(r.action.as_ref().map(|a| a.target()), Some("cu0.spm5"));
}

#[test]
fn planner_reproduces_the_reference_designs() {
    let p = TechParams::shipped();
    for (target, v) in [(590.0, Variant::V590), (667.0, Variant::V667)] {
        let base = build_reference_design(1, Variant::Baseline).unwrap();
        let r = optimize_to_target(&base, &p, &Spec::new(1, target, false)).unwrap();
        assert!(r.feasible);
        assert_eq!(r.design.without_log(), common::references()[&(1, v)].without_log());
        assert_eq!(r.ppa.memory_count, v.block_count(1));
    }
    assert_eq!(Variant::V667.block_count(1), 71);
}

#[test]
fn low_target_needs_no_transforms() {
    let p = TechParams::shipped();
    let base = build_reference_design(4, Variant::Baseline).unwrap();
    let r = optimize_to_target(&base, &p, &Spec::new(4, 400.0, false)).unwrap();
    assert!(r.feasible);
    assert!(r.transform_log.is_empty());
    assert_eq!(r.iterations, 0);
    assert_eq!(r.design, base);
}

#[test]
fn wire_model_caps_eight_cus_near_600() {
    let p = TechParams::shipped();
    let base = build_reference_design(8, Variant::Baseline).unwrap();
    let r = optimize_to_target(&base, &p, &Spec::new(8, 667.0, true)).unwrap();
    assert!(!r.feasible);
    assert!((r.achieved_fmax_mhz - 600.0).abs() < 15.0, "{}", r.achieved_fmax_mhz);
    assert!((r.ppa.fmax_mhz - r.achieved_fmax_mhz).abs() < 1e-12);
}

#[test]
fn history_is_monotone_and_replay_reproduces_fmax() {
    let p = TechParams::shipped();
    let base = build_reference_design(2, Variant::Baseline).unwrap();
    let r = optimize_to_target(&base, &p, &Spec::new(2, 667.0, false)).unwrap();
    assert_eq!(r.history.len() as u32, r.iterations + 1);
    for w in r.history.windows(2) {
        let (a, b) = (w[0], w[1]);
        assert!(b.cp_ns < a.cp_ns - 1e-9 || (b.cp_ns - a.cp_ns).abs() < 1e-9 && b.critical_sources < a.critical_sources);
    }
    let again = replay(&base, &r.transform_log).unwrap();
    let f = build_timing_graph(&again, &p, None).unwrap().fmax().unwrap();
    assert!((f - r.achieved_fmax_mhz).abs() < 1e-9);
}

#[test]
fn enumeration_covers_the_grid_in_order() {
    let p = TechParams::shipped();
    let all = enumerate_candidates(&[1, 2, 4, 8], &[500.0, 590.0, 667.0], &p, false).unwrap();
    assert_eq!(all.len(), 12);
    assert!(all.iter().all(|r| r.feasible));
    let keys: Vec<(u32, f64)> = all.iter().map(|r| (r.num_cus, r.target_freq_mhz)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    assert_eq!(keys, sorted);
    assert!(enumerate_candidates(&[], &[500.0], &p, false).unwrap().is_empty());
    let table = summary_table(&all);
    assert_eq!(table.lines().count(), 13);
    assert!(table.starts_with("#CU & Freq.,"));
}

#[test]
fn spec_check_flags_each_budget() {
    let p = TechParams::shipped();
    let base = build_reference_design(1, Variant::Baseline).unwrap();
    let r = optimize_to_target(&base, &p, &Spec::new(1, 667.0, false)).unwrap();
    let area = r.ppa.total_area_mm2;
    assert!((area / 4.77 - 1.0).abs() < 0.02, "{area}");
    let mut spec = Spec::new(1, 667.0, false);
    spec.max_area_mm2 = Some(5.0);
    assert!(check_spec(&r, &spec).pass);
    spec.max_area_mm2 = Some(4.5);
    assert_eq!(check_spec(&r, &spec).violated, ["area"]);
    spec.max_power_w = Some(0.01);
    spec.target_freq_mhz = 700.0;
    assert_eq!(check_spec(&r, &spec).violated, ["frequency", "area", "power"]);
}

#[test]
fn bad_specs_are_rejected() {
    let p = TechParams::shipped();
    let base = build_reference_design(1, Variant::Baseline).unwrap();
    assert!(matches!(optimize_to_target(&base, &p, &Spec::new(9, 500.0, false)), Err(Error::Config(_))));
    assert!(matches!(optimize_to_target(&base, &p, &Spec::new(1, -1.0, false)), Err(Error::Range(_))));
    assert!(matches!(
        optimize_to_target(&base, &TechParams::uncalibrated(), &Spec::new(1, 590.0, false)),
        Err(Error::State(_))
    ));
}
