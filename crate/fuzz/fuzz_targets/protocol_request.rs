#![no_main]

use bfma::backend::MmaRequest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(v) = MmaRequest::parse(line) {
        let again = v.to_line();
        assert_eq!(MmaRequest::parse(&again).unwrap().to_line(), again);
    }
});
