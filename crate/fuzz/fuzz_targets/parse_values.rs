#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(values) = dpmean::io::parse_values(text) {
        let mut last = 0;
        for (line, v) in values {
            assert!(v.is_finite());
            assert!(line > last);
            last = line;
        }
    }
});
