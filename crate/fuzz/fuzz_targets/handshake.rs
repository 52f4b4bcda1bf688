#![no_main]

use bfma::backend::Handshake;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(v) = Handshake::parse(line) {
        let again = v.to_line();
        assert_eq!(Handshake::parse(&again).unwrap().to_line(), again);
    }
});
