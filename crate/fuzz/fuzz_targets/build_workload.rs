#![no_main]

use ggpu_core::design::GGpuConfig;
use ggpu_core::sim::{build_workload, simulate, SimParams};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mut w) = build_workload(text) {
        w.work_items = w.work_items.min(4096);
        w.serial_prologue_cycles = w.serial_prologue_cycles.min(1 << 20);
        let r = simulate(&w, &GGpuConfig::new(2).unwrap(), &SimParams::default(), 0).unwrap();
        assert_eq!(r.work_item_instructions, w.work_items * u64::from(w.instr_per_item));
    }
});
