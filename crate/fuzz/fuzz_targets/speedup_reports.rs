#![no_main]

use ggpu_core::analysis::{load_area_map, read_delimited_report, read_structured_report};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = read_delimited_report(text);
    let _ = read_structured_report(text);
    let _ = load_area_map(text);
});
