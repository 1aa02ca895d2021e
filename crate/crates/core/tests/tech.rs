mod common;

use ggpu_core::calibration::*;
use ggpu_core::design::{build_reference_design, MemBlockSpec, Variant};
use ggpu_core::tech::*;
use ggpu_core::Error;
use proptest::prelude::*;

fn table1() -> Vec<Table1Row> {
    parse_table1(&common::fixture("table1.csv")).unwrap()
}

#[test]
fn shipped_params_are_calibrated() {
    let p = TechParams::shipped();
    assert!(p.is_calibrated());
    assert!(p.a0 > 0.0);
    assert!((p.ff_area / p.logic_area - FF_CELL_RATIO).abs() < 1e-12);
}

#[test]
fn unset_parameter_is_a_state_error() {
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    assert!(matches!(estimate_ppa(&d, &TechParams::uncalibrated(), 500.0), Err(Error::State(_))));
    let mut p = TechParams::shipped();
    p.kappa = f64::NAN;
    assert!(matches!(estimate_ppa(&d, &p, 500.0), Err(Error::State(_))));
    let doc = TechParams::shipped().to_document().replace("\"abit\"", "\"abit_unused\"");
    let parsed = TechParams::from_document(&doc);
    assert!(parsed.is_err() || matches!(parsed.unwrap().check(), Err(Error::State(_))));
}

#[test]
fn delay_minimum_point_and_monotonicity() {
    let p = TechParams::shipped();
    let d = mem_delay(&MemBlockSpec::dual(16, 2), &p).unwrap();
    assert!((d - (p.t0 + 2.0 * p.tb)).abs() < 1e-15);
    let mut w = 16;
    while w < 65536 {
        let a = mem_delay(&MemBlockSpec::dual(w, 32), &p).unwrap();
        let b = mem_delay(&MemBlockSpec::dual(2 * w, 32), &p).unwrap();
        assert!(b > a);
        w *= 2;
    }
    assert!(matches!(mem_delay(&MemBlockSpec::dual(8, 32), &p), Err(Error::Range(_))));
    assert!(matches!(mem_delay(&MemBlockSpec::dual(64, 145), &p), Err(Error::Range(_))));
}

#[test]
fn words_split_delay_follows_the_mux_formula() {
    let p = TechParams::shipped();
    for k in [2u32, 4, 8] {
        let before = mem_delay(&MemBlockSpec::dual(4096, 64), &p).unwrap();
        let after = p.t0
            + p.tw * (4096.0 / (16.0 * f64::from(k))).log2()
            + p.tb * 64.0
            + p.mux_step * f64::from(k).log2().ceil();
        assert!(p.tw * f64::from(k).log2() > p.mux_step * f64::from(k).log2().ceil());
        assert!(after < before);
    }
}

#[test]
fn split_superadditivity_equals_a0() {
    let p = TechParams::shipped();
    let big = mem_area(&MemBlockSpec::dual(1024, 32), &p).unwrap();
    let half = mem_area(&MemBlockSpec::dual(512, 32), &p).unwrap();
    assert!((2.0 * half - big - p.a0).abs() < 1e-15);
    let narrow = mem_area(&MemBlockSpec::dual(1024, 16), &p).unwrap();
    assert!((2.0 * narrow - big - p.a0).abs() < 1e-15);
    let (lb, _) = mem_power(&MemBlockSpec::dual(1024, 32), 1.0, &p, 500.0).unwrap();
    let (lh, _) = mem_power(&MemBlockSpec::dual(512, 32), 1.0, &p, 500.0).unwrap();
    assert!(2.0 * lh > lb);
}

#[test]
fn idle_memory_leaks_but_draws_no_dynamic_power() {
    let p = TechParams::shipped();
    let (leak, dynp) = mem_power(&MemBlockSpec::dual(2048, 32), 0.0, &p, 667.0).unwrap();
    assert!(leak > 0.0);
    assert_eq!(dynp, 0.0);
    assert!(matches!(mem_power(&MemBlockSpec::dual(2048, 32), 1.5, &p, 667.0), Err(Error::Range(_))));
}

#[test]
fn mean_block_area_matches_baseline_memory_area() {
    let p = TechParams::shipped();
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    let total: f64 = d.memories.iter().map(|m| mem_area(&m.spec, &p).unwrap()).sum();
    let mean = total / d.memories.len() as f64;
    assert!((mean / (2.68 / 51.0) - 1.0).abs() < 0.02, "mean block area {mean}");
}

#[test]
fn estimator_reproduces_table1_endpoints() {
    let p = TechParams::shipped();
    let one = estimate_ppa(&build_reference_design(1, Variant::Baseline).unwrap(), &p, 500.0).unwrap();
    let eight = estimate_ppa(&build_reference_design(8, Variant::Baseline).unwrap(), &p, 500.0).unwrap();
    assert!((one.total_area_mm2 / 4.19 - 1.0).abs() < 0.02, "{}", one.total_area_mm2);
    assert!((eight.total_area_mm2 / 26.51 - 1.0).abs() < 0.02, "{}", eight.total_area_mm2);
    assert_eq!(one.memory_count, 51);
    assert_eq!(eight.memory_count, 345);
}

#[test]
fn estimate_invariants_and_frequency_scaling() {
    let p = TechParams::shipped();
    for d in common::references().values() {
        let a = estimate_ppa(d, &p, 500.0).unwrap();
        let b = estimate_ppa(d, &p, 750.0).unwrap();
        assert!(a.memory_area_mm2 <= a.total_area_mm2);
        assert!((a.total_w - (a.leakage_mw / 1000.0 + a.dynamic_w)).abs() < 1e-12);
        assert_eq!(a.total_area_mm2, b.total_area_mm2);
        assert_eq!(a.leakage_mw, b.leakage_mw);
        assert!((b.dynamic_w / a.dynamic_w - 1.5).abs() < 1e-12);
        assert_eq!(a.memory_count as usize, d.memories.len());
    }
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    assert!(matches!(estimate_ppa(&d, &p, 0.0), Err(Error::Range(_))));
}

#[test]
fn estimate_is_affine_in_cu_count() {
    let p = TechParams::shipped();
    for v in Variant::ALL {
        let area: Vec<f64> = (1..=8)
            .map(|c| estimate_ppa(&common::references()[&(c, v)], &p, 500.0).unwrap().total_area_mm2)
            .collect();
        let step = area[1] - area[0];
        for w in area.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-9);
        }
    }
}

#[test]
fn table1_linear_fits_match_least_squares_oracle() {
    let fits = linear_fits(&table1());
    let get = |metric: &str| {
        fits.iter()
            .find(|f| f.variant == Variant::Baseline && f.metric == metric)
            .unwrap()
            .clone()
    };
    let area = get("total_area_mm2");
    assert!((area.slope - 3.1850).abs() < 5e-4, "{}", area.slope);
    assert!((area.intercept - 1.0537).abs() < 5e-4, "{}", area.intercept);
    let dynp = get("dynamic_w");
    assert!((dynp.slope - 1.6210).abs() < 5e-4, "{}", dynp.slope);
    for (c, y) in [(2.0, 7.45), (4.0, 13.84)] {
        assert!(((area.slope * c + area.intercept) / y - 1.0).abs() < 0.01);
    }
}

#[test]
fn block_law_violation_rejects_calibration() {
    let mut rows = table1();
    rows[0].memories = 50;
    assert!(matches!(calibrate_ppa(&rows), Err(Error::Calibration(_))));
    assert!(matches!(calibrate_ppa(&[]), Err(Error::Calibration(_))));
}

#[test]
fn shipped_area_fit_residuals_are_small() {
    let rows = table1();
    for r in residuals(&rows, &TechParams::shipped()).unwrap() {
        assert!(r.total_area_rel.abs() < 0.02, "{}@{}: {}", r.cus, r.freq_mhz, r.total_area_rel);
        assert!(r.memory_area_rel.abs() < 0.03, "{}@{}: {}", r.cus, r.freq_mhz, r.memory_area_rel);
    }
}

#[test]
fn ppa_calibration_is_idempotent() {
    let truth = TechParams::shipped();
    let rows: Vec<Table1Row> = table1()
        .iter()
        .map(|r| {
            let d = build_reference_design(r.cus, r.variant().unwrap()).unwrap();
            let e = estimate_ppa(&d, &truth, r.freq_mhz).unwrap();
            Table1Row {
                total_area_mm2: e.total_area_mm2,
                memory_area_mm2: e.memory_area_mm2,
                leakage_mw: e.leakage_mw,
                dynamic_w: e.dynamic_w,
                total_w: e.total_w,
                ..r.clone()
            }
        })
        .collect();
    let c = calibrate_ppa(&rows).unwrap();
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    assert!(rel(c.a0, truth.a0) < 1e-6);
    assert!(rel(c.abit, truth.abit) < 1e-6);
    assert!(rel(c.logic_area, truth.logic_area) < 1e-6);
    assert!(rel(c.leak_blk, truth.leak_blk) < 1e-6);
    assert!(rel(c.leak_comb, truth.leak_comb) < 1e-6);
    assert!(rel(c.edyn_blk, truth.edyn_blk) < 1e-6);
    assert!(rel(c.edyn_comb, truth.edyn_comb) < 1e-6);
}

#[test]
fn reduced_grid_recovers_shipped_timing_coefficients() {
    let shipped = TechParams::shipped();
    let grid = TimingGrid {
        tw: vec![0.010, 0.0125, 0.015],
        tb: vec![0.0135, 0.014, 0.0145],
        mux_step: vec![0.001, 0.002],
    };
    let fit = calibrate_timing(&shipped, &grid).unwrap();
    assert_eq!((fit.tw, fit.tb, fit.mux_step), (shipped.tw, shipped.tb, shipped.mux_step));
    assert!((fit.t0 - shipped.t0).abs() < 1e-12);
    assert!(fit.margin_ns > 0.0);
}

#[test]
fn baseline_period_pins_t0() {
    let p = TechParams::shipped();
    assert!((solve_t0(&p).unwrap() - p.t0).abs() < 1e-12);
}

#[test]
fn kappa_calibration_reproduces_the_shipped_value() {
    let p = TechParams::shipped();
    let k = calibrate_kappa(&TechParams { kappa: 0.0, ..p }).unwrap();
    assert!((k / p.kappa - 1.0).abs() < 1e-6, "{k} vs {}", p.kappa);
}

#[test]
fn table1_round_trip_and_header_check() {
    let rows = table1();
    assert_eq!(rows.len(), 12);
    assert_eq!(parse_table1(&write_table1(&rows)).unwrap(), rows);
    let bad = common::fixture("table1.csv").replacen("#FF", "FFs", 1);
    assert!(matches!(parse_table1(&bad), Err(Error::Parse { line: 1, .. })));
    let zero = common::fixture("table1.csv").replacen("4.19", "0", 1);
    assert!(matches!(parse_table1(&zero), Err(Error::Parse { line: 2, column: 2, .. })));
}

#[test]
fn area_growth_matches_growth_oracle() {
    let p = TechParams::shipped();
    let g = area_growth(&p, &[1, 2, 4, 8]).unwrap();
    for (i, c) in [1u32, 2, 4, 8].into_iter().enumerate() {
        let blocks590 = f64::from(10 * c + 7);
        let a500 = estimate_ppa(&build_reference_design(c, Variant::Baseline).unwrap(), &p, 500.0)
            .unwrap()
            .total_area_mm2;
        let want = 100.0 * (blocks590 * p.a0 + 257.0 * p.ff_area) / a500;
        assert!((g.to_590_pct[i] - want).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn delay_is_monotone_in_both_axes(w in 16u32..=32768, b in 2u32..=143) {
        let p = TechParams::shipped();
        let d = mem_delay(&MemBlockSpec::dual(w, b), &p).unwrap();
        prop_assert!(mem_delay(&MemBlockSpec::dual(w * 2, b), &p).unwrap() > d);
        prop_assert!(mem_delay(&MemBlockSpec::dual(w, b + 1), &p).unwrap() > d);
    }

    #[test]
    fn area_is_superadditive_under_any_fan(w in 16u32..=4096, b in 2u32..=144, k in 1u32..=4) {
        let p = TechParams::shipped();
        let fan = 1u32 << k;
        let whole = mem_area(&MemBlockSpec::dual(w * fan, b), &p).unwrap();
        let banks = f64::from(fan) * mem_area(&MemBlockSpec::dual(w, b), &p).unwrap();
        prop_assert!((banks - whole - f64::from(fan - 1) * p.a0).abs() < 1e-12);
    }
}
