#![no_main]

use bfma::backend::{serve, SimBackend};
use bfma::simulator::BlockFmaConfig;
use libfuzzer_sys::fuzz_target;

// Arbitrary request lines never bring the server down.
fuzz_target!(|data: &[u8]| {
    let mut backend = SimBackend::new(BlockFmaConfig::default()).unwrap();
    let mut out = Vec::new();
    let _ = serve(&mut backend, data, &mut out);
});
