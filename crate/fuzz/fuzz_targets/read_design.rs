#![no_main]

use ggpu_core::design::{read_design, validate_design, write_design};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = read_design(text) {
        let report = validate_design(&d);
        if report.is_empty() {
            assert_eq!(read_design(&write_design(&d)).unwrap(), d);
        }
    }
});
