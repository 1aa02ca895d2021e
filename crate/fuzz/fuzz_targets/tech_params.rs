#![no_main]

use ggpu_core::tech::TechParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = TechParams::from_document(text) {
        if p.check().is_ok() {
            let _ = TechParams::from_document(&p.to_document()).unwrap();
        }
    }
});
