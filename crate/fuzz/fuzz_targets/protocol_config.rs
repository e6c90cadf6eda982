#![no_main]

use ari_core::protocol::ProtocolConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<ProtocolConfig>(data) {
        let _ = cfg.validate();
        let _ = cfg.cycle_frequency();
    }
});
