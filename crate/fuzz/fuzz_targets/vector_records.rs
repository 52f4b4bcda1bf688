#![no_main]

use bfma::probes::parse_records;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_records(text) {
        let again: String = records.iter().map(|r| r.to_line() + "\n").collect();
        assert_eq!(parse_records(&again).unwrap().len(), records.len());
    }
});
