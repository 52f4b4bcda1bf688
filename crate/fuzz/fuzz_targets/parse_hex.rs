#![no_main]

use bfma::formats::{parse_hex, to_hex, FpFormat};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&sel, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let formats = FpFormat::builtin();
    let fmt = &formats[sel as usize % formats.len()];
    if let Ok(bits) = parse_hex(text, fmt) {
        assert_eq!(parse_hex(&to_hex(bits, fmt), fmt).unwrap(), bits);
    }
});
