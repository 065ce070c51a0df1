#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = dpmean::io::read_dataset(text, -1.0, 2.5) {
        assert!(d.values().iter().all(|v| (-1.0..=2.5).contains(v)));
        if !d.is_empty() {
            let mean = dpmean::mechanisms::true_mean(&d).unwrap();
            assert!((-1.0..=2.5).contains(&mean));
        }
    }
});
