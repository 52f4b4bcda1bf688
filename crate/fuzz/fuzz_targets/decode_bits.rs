#![no_main]

use bfma::formats::{decode, encode, FpFormat, RoundingMode, Value};
use libfuzzer_sys::fuzz_target;

// Decoding any pattern and re-encoding it gives the pattern back, padding
// and NaN payloads aside.
fuzz_target!(|data: &[u8]| {
    if data.len() < 9 {
        return;
    }
    let formats = FpFormat::builtin();
    let fmt = &formats[data[0] as usize % formats.len()];
    let bits = u64::from_le_bytes(data[1..9].try_into().unwrap());
    let bits = if fmt.storage_bits == 64 { bits } else { bits & ((1u64 << fmt.storage_bits) - 1) };
    let v = decode(bits, fmt);
    if let Value::Special(_) = v {
        return;
    }
    let (back, flags) = encode(&v, fmt, RoundingMode::Rne);
    assert!(!flags.inexact);
    assert_eq!(decode(back, fmt), v);
});
