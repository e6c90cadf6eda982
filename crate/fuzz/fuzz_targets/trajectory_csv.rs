#![no_main]

use ari_core::ingest::Trajectory;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Trajectory::from_csv_str("fuzz", text);
    }
});
