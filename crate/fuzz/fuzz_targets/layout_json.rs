#![no_main]

use ari_core::arena::{chance_level, load_layout_str};
use ari_core::Metric;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(layout) = load_layout_str(text) {
        for m in Metric::ALL {
            let _ = chance_level(&layout, m);
        }
    }
});
