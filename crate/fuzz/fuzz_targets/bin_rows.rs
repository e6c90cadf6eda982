#![no_main]

use ari_core::metrics::parse_bin_rows;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_bin_rows(text);
    }
});
