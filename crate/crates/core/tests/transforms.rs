mod common;

use ggpu_core::design::{build_reference_design, validate_design, MemBlockSpec, Variant, PIPELINED_NET};
use ggpu_core::tech::{mem_area, mem_delay, TechParams};
use ggpu_core::transforms::*;
use ggpu_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bits_of(d: &ggpu_core::design::Design) -> u64 {
    d.memories.iter().map(|m| m.spec.bits()).sum()
}

#[test]
fn split_below_minimum_words_is_a_range_error() {
    assert!(matches!(words_split_legal(&MemBlockSpec::dual(16, 32), 2), Err(Error::Range(_))));
    assert!(words_split_legal(&MemBlockSpec::dual(32, 32), 2).is_ok());
    assert!(matches!(bits_split_legal(&MemBlockSpec::dual(512, 6), 4), Err(Error::Range(_))));
    assert!(bits_split_legal(&MemBlockSpec::dual(512, 6), 2).is_ok());
    assert!(matches!(words_split_legal(&MemBlockSpec::dual(512, 32), 3), Err(Error::Range(_))));
    assert!(matches!(bits_split_legal(&MemBlockSpec::dual(512, 4), 4), Err(Error::Range(_))));
}

#[test]
fn words_split_banks_are_faster_and_cost_one_block_overhead() {
    let p = TechParams::shipped();
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    let old = d.memory("mc.cache_data0").unwrap().spec;
    let nd = split_memory_words(&d, "mc.cache_data0", 2).unwrap();
    assert!(nd.memory("mc.cache_data0").is_none());
    let banks: Vec<_> = nd
        .memories
        .iter()
        .filter(|m| m.logical_parent.as_deref() == Some("mc.cache_data0"))
        .collect();
    assert_eq!(banks.len(), 2);
    for b in &banks {
        assert_eq!(b.spec.words, old.words / 2);
        let dd = mem_delay(&old, &p).unwrap() - mem_delay(&b.spec, &p).unwrap();
        assert!((dd - p.tw).abs() < 1e-12);
    }
    let mux = nd.stage("mc.cache_data0.mux").unwrap();
    assert_eq!(mux.mux_levels, 1);
    let area: f64 = banks.iter().map(|b| mem_area(&b.spec, &p).unwrap()).sum();
    assert!((area - mem_area(&old, &p).unwrap() - p.a0).abs() < 1e-12);
    assert_eq!(bits_of(&nd), bits_of(&d));
    assert!(validate_design(&nd).is_empty());
}

#[test]
fn bits_split_halves_width() {
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    let nd = split_memory_bits(&d, "mc.rtm", 4).unwrap();
    let banks: Vec<_> = nd
        .memories
        .iter()
        .filter(|m| m.logical_parent.as_deref() == Some("mc.rtm"))
        .collect();
    assert_eq!(banks.len(), 4);
    assert!(banks.iter().all(|b| b.spec.word_bits == 8 && b.spec.words == 1024));
    assert_eq!(bits_of(&nd), bits_of(&d));
    assert!(validate_design(&nd).is_empty());
}

#[test]
fn pipeline_adds_one_register_per_net_bit() {
    let d = build_reference_design(3, Variant::Baseline).unwrap();
    let width = u64::from(d.net(PIPELINED_NET).unwrap().width);
    let nd = insert_pipeline(&d, PIPELINED_NET).unwrap();
    assert_eq!(width, 257);
    assert_eq!(nd.ff_count() - d.ff_count(), width);
    assert!(nd.net(PIPELINED_NET).is_none());
    assert!(matches!(insert_pipeline(&nd, PIPELINED_NET), Err(Error::Lookup(_))));
    assert_eq!(cu_pipeline_depth(&nd), 0);
}

#[test]
fn internal_nets_cannot_be_pipelined() {
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    let nd = split_memory_words(&d, "mc.rtm", 2).unwrap();
    let internal = nd.nets.iter().find(|n| n.internal).unwrap().id.clone();
    assert!(matches!(insert_pipeline(&nd, &internal), Err(Error::Legality(_))));
}

#[test]
fn unknown_targets_are_lookup_errors() {
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    assert!(matches!(split_memory_words(&d, "ghost", 2), Err(Error::Lookup(_))));
    assert!(matches!(insert_pipeline(&d, "ghost"), Err(Error::Lookup(_))));
}

#[test]
fn transforms_do_not_mutate_their_input() {
    let d = build_reference_design(2, Variant::Baseline).unwrap();
    let copy = d.clone();
    let _ = split_memory_bits(&d, "mc.cache_tag0", 2).unwrap();
    assert_eq!(d, copy);
}

#[test]
fn replay_reports_the_failing_sequence_number() {
    let d0 = build_reference_design(1, Variant::Baseline).unwrap();
    let d1 = split_memory_words(&d0, "mc.rtm", 2).unwrap();
    let d2 = split_memory_words(&d1, "mc.cache_tag1", 2).unwrap();
    let mut log = d2.transform_log.clone();
    assert_eq!(replay(&d0, &log).unwrap(), d2);
    assert_eq!(replay(&d0, &[]).unwrap(), d0);
    log.push(Transform {
        sequence_no: 2,
        kind: TransformKind::SplitBits { mem_id: "mc.rtm".into(), fan: 2 },
    });
    match replay(&d0, &log) {
        Err(Error::Replay { seq, .. }) => assert_eq!(seq, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn log_sequence_numbers_are_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let d = common::random_design(&mut rng, 6);
        for (i, t) in d.transform_log.iter().enumerate() {
            assert_eq!(t.sequence_no as usize, i);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_transform_chains_stay_valid_and_replayable(seed in any::<u64>(), steps in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = common::random_design(&mut rng, 0);
        let mut d = base.clone();
        let p = TechParams::shipped();
        for _ in 0..steps {
            let opts = common::legal_transforms(&d);
            let t = &opts[rand::Rng::random_range(&mut rng, 0..opts.len())];
            let nd = apply(&d, t).unwrap();
            prop_assert!(validate_design(&nd).is_empty(), "{} after {}: {:?}", d.config.num_cus, t, validate_design(&nd));
            prop_assert_eq!(bits_of(&nd), bits_of(&d));
            let a: f64 = d.memories.iter().map(|m| mem_area(&m.spec, &p).unwrap()).sum();
            let na: f64 = nd.memories.iter().map(|m| mem_area(&m.spec, &p).unwrap()).sum();
            let extra = (nd.memories.len() as f64 - d.memories.len() as f64) * p.a0;
            prop_assert!((na - a - extra).abs() < 1e-9);
            d = nd;
        }
        prop_assert_eq!(replay(&base, &d.transform_log[base.transform_log.len()..]).unwrap(), d);
    }
}

#[test]
fn nested_split_of_one_bank_stays_valid() {
    let d = build_reference_design(1, Variant::Baseline).unwrap();
    let d = split_memory_bits(&d, "cu0.spm0", 2).unwrap();
    let d = split_memory_words(&d, "cu0.spm0.s1", 4).unwrap();
    assert!(validate_design(&d).is_empty(), "{:?}", validate_design(&d));
    let mut broken = d.clone();
    broken.memories.retain(|m| m.id != "cu0.spm0.s1.w2");
    assert!(!validate_design(&broken).is_empty());
}
