#![no_main]

use ari_core::protocol::parse_command_script;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_command_script(text);
    }
});
