//! Every checked-in fuzz seed must be accepted by the parser it seeds.

use std::fs;
use std::path::PathBuf;

use ari_core::arena::load_layout_str;
use ari_core::ingest::{parse_tracking_str, Trajectory};
use ari_core::metrics::parse_bin_rows;
use ari_core::protocol::{parse_command_script, ProtocolConfig, SessionLog};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(PathBuf, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn seeds_parse() {
    for (p, t) in seeds("tracking_csv") {
        parse_tracking_str(&t, "center", 10.0).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("layout_json") {
        load_layout_str(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("command_script") {
        parse_command_script(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("protocol_config") {
        let cfg: ProtocolConfig = serde_json::from_str(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.validate().unwrap();
    }
    for (p, t) in seeds("trajectory_csv") {
        Trajectory::from_csv_str("seed", &t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("bin_rows") {
        assert!(!parse_bin_rows(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display())).is_empty());
    }
}

#[test]
fn session_log_seed_round_trips() {
    for (p, t) in seeds("session_log") {
        let log = SessionLog::from_csv_str(&t, 0.05).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let again = SessionLog::from_csv_str(&log.to_csv_string(), 0.05).unwrap();
        assert_eq!(log.rows.len(), again.rows.len());
        assert_eq!(log.to_csv_string(), again.to_csv_string());
    }
}
