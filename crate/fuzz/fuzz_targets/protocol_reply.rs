#![no_main]

use bfma::backend::MmaReply;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(v) = MmaReply::parse(line) {
        let again = v.to_line();
        assert_eq!(MmaReply::parse(&again).unwrap().to_line(), again);
    }
});
