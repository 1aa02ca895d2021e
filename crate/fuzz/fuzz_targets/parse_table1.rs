#![no_main]

use ggpu_core::tech::{parse_table1, write_table1};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_table1(text) {
        assert_eq!(parse_table1(&write_table1(&rows)).unwrap().len(), rows.len());
    }
});
