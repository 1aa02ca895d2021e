#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::OnceLock;

use ggpu_core::design::{build_reference_design, Design, Endpoint, Variant};
use ggpu_core::transforms::{bits_split_legal, words_split_legal, TransformKind};
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn fixture(rel: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// All 24 reference designs, built once per test binary.
pub fn references() -> &'static BTreeMap<(u32, Variant), Design> {
    static CELL: OnceLock<BTreeMap<(u32, Variant), Design>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut m = BTreeMap::new();
        for c in 1..=8 {
            for v in Variant::ALL {
                m.insert((c, v), build_reference_design(c, v).unwrap());
            }
        }
        m
    })
}

/// Every transform that is legal on `d`, fans 2 and 4.
pub fn legal_transforms(d: &Design) -> Vec<TransformKind> {
    let mut out = Vec::new();
    for m in &d.memories {
        for fan in [2, 4] {
            if words_split_legal(&m.spec, fan).is_ok() {
                out.push(TransformKind::SplitWords {
                    mem_id: m.id.clone(),
                    fan,
                });
            }
            if bits_split_legal(&m.spec, fan).is_ok() {
                out.push(TransformKind::SplitBits {
                    mem_id: m.id.clone(),
                    fan,
                });
            }
        }
    }
    for n in d.nets.iter().filter(|n| !n.internal) {
        out.push(TransformKind::Pipeline { net_id: n.id.clone() });
    }
    out
}

/// A reference design of random size and variant with up to `extra` random
/// legal transforms applied on top.
pub fn random_design(rng: &mut impl Rng, extra: usize) -> Design {
    let c = rng.random_range(1..=8);
    let v = *Variant::ALL.choose(rng).unwrap();
    let mut d = references()[&(c, v)].clone();
    for _ in 0..rng.random_range(0..=extra) {
        let opts = legal_transforms(&d);
        let t = opts.choose(rng).unwrap();
        d = ggpu_core::transforms::apply(&d, t).unwrap();
    }
    d
}

/// Memories touched by a transform, directly or through a pipelined net.
pub fn footprint(d: &Design, t: &TransformKind) -> Vec<String> {
    match t {
        TransformKind::SplitWords { mem_id, .. } | TransformKind::SplitBits { mem_id, .. } => vec![mem_id.clone()],
        TransformKind::Pipeline { net_id } => {
            let n = d.net(net_id).unwrap();
            [&n.from, &n.to]
                .into_iter()
                .filter_map(|e| match e {
                    Endpoint::Mem(m) => Some(m.clone()),
                    _ => None,
                })
                .collect()
        }
    }
}
