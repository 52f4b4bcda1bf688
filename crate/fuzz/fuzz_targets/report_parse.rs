#![no_main]

use bfma::inference::parse_reports;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(reports) = parse_reports(text) {
        let again: String = reports.iter().map(|r| r.to_line() + "\n").collect();
        let back = parse_reports(&again).unwrap();
        assert_eq!(back.len(), reports.len());
    }
});
