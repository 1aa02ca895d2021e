#![no_main]

use ggpu_core::design::GGpuConfig;
use ggpu_core::sim::SimParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = SimParams::from_document(text) {
        let _ = p.check(&GGpuConfig::new(8).unwrap());
    }
});
