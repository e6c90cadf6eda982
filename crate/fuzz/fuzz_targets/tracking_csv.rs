#![no_main]

use ari_core::ingest::{downsample_1hz, parse_tracking_str, qc_check};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(track) = parse_tracking_str(text, "center", 10.0) {
        let _ = qc_check(&track, 0.6, 0.9);
        let _ = downsample_1hz(&track, 0.6);
    }
});
