#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = dpmean::io::parse_reports_csv(text) {
        // Whatever parses must survive a write/parse round trip.
        let mut buf = Vec::new();
        dpmean::io::write_reports_csv(&rows, &mut buf).unwrap();
        let again = dpmean::io::parse_reports_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(rows.len(), again.len());
    }
});
