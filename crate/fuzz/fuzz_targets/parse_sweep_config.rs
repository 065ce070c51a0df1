#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = dpmean::io::parse_sweep_config(text) {
        assert!(cfg.trials >= 1);
        assert!(cfg.cell_count() >= 1);
    }
});
