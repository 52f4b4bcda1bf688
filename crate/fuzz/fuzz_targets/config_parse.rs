#![no_main]

use bfma::simulator::BlockFmaConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = BlockFmaConfig::from_text(text) {
        assert_eq!(BlockFmaConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }
});
