#![no_main]

use ggpu_core::analysis::{load_benchmarks, raw_speedup, CU_COLUMNS};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = load_benchmarks(text) {
        for r in &records {
            for c in CU_COLUMNS {
                assert!(raw_speedup(r, c).unwrap() > 0.0);
            }
        }
    }
});
