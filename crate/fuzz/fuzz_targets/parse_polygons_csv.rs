#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(polys) = dpmean::io::parse_polygons_csv(text) {
        assert!(polys.iter().all(|(_, v)| !v.is_empty()));
    }
});
