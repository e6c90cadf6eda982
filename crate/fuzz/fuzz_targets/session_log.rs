#![no_main]

use ari_core::protocol::SessionLog;
use libfuzzer_sys::fuzz_target;

// Round trip: anything that parses must print and parse back to the same log.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(log) = SessionLog::from_csv_str(text, 0.05) {
        let again = SessionLog::from_csv_str(&log.to_csv_string(), 0.05).expect("reparse");
        assert_eq!(log.rows.len(), again.rows.len());
    }
});
