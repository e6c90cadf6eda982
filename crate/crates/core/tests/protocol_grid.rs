use ari_core::metrics::BreathingSchedule;
use ari_core::protocol::{
    check_safety, run_session, run_session_with, Command, CommandKind, LogRow, Phase, ProtocolConfig, SessionLog,
};
use ari_core::Side;
use proptest::prelude::*;

fn grid() -> Vec<ProtocolConfig> {
    let mut out = Vec::new();
    for cycle_period in [1.0, 1.5, 2.0] {
        for side_period in [60.0, 300.0] {
            out.push(ProtocolConfig {
                cycle_period,
                side_period,
                ..Default::default()
            });
        }
    }
    out
}

/// Maximal runs of consecutive rows where the active side is inflating:
/// `(first row, length in rows)`.
fn inflation_runs(rows: &[LogRow]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, r) in rows.iter().enumerate() {
        let inflating = r.phase == Phase::Inflating;
        match (inflating, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - s));
                start = None;
            }
            _ => {}
        }
    }
    runs
}

fn temp_range(log: &SessionLog) -> (f64, f64) {
    log.rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.temp), b.max(r.temp)))
}

#[test]
fn grid_runs_are_safe() {
    for cfg in grid() {
        let log = run_session(&cfg).unwrap();
        assert_eq!(log.rows.len() as u64, cfg.session_ticks());
        let v = check_safety(&log, &cfg);
        assert!(v.is_empty(), "cycle {} side {}: {:?}", cfg.cycle_period, cfg.side_period, &v[..v.len().min(5)]);
        assert!(log.faults.is_empty());
    }
}

#[test]
fn side_changes_fall_on_window_boundaries() {
    for cfg in grid() {
        let log = run_session(&cfg).unwrap();
        let changes = log.side_changes();
        let windows = (cfg.session_len / cfg.side_period).round() as usize;
        assert_eq!(changes.len(), windows - 1);
        for (k, t) in changes.iter().enumerate() {
            assert!((t - (k + 1) as f64 * cfg.side_period).abs() < 1e-9, "{t}");
        }
    }
    let default_log = run_session(&ProtocolConfig::default()).unwrap();
    assert_eq!(default_log.side_changes().len(), 5);
}

#[test]
fn schedule_agrees_with_occupancy_schedule_every_second() {
    for cfg in grid() {
        let log = run_session(&cfg).unwrap();
        let sched = BreathingSchedule::new(cfg.start_side, cfg.side_period, cfg.session_len);
        for s in 0..cfg.session_len as u32 {
            let t = s as f64;
            assert_eq!(log.active_side_at(t), Some(sched.active_side(t)), "t={t}");
        }
    }
}

#[test]
fn every_switch_completes_with_both_groups_deflated() {
    for cfg in grid() {
        let log = run_session(&cfg).unwrap();
        let done = log.switch_completions();
        assert_eq!(done.len(), log.side_changes().len());
        for i in done {
            let r = &log.rows[i];
            assert!(r.pressure[0] < 0.01 && r.pressure[1] < 0.01, "{r:?}");
        }
        // no row inflates a group while the other still holds pressure
        for r in &log.rows {
            for g in 0..2 {
                if r.pump_on[g][0] {
                    assert!(r.pressure[1 - g] < 0.01, "{r:?}");
                }
            }
        }
    }
}

#[test]
fn steady_state_peaks_match_first_order_response() {
    for cfg in grid() {
        let log = run_session(&cfg).unwrap();
        let half_ticks = (cfg.cycle_period / 2.0 / cfg.tick).round() as usize;
        let closed = cfg.p_max - (cfg.p_max - cfg.p_min) * (-(cfg.cycle_period / 2.0) / cfg.pressure_tau).exp();
        assert!(closed > cfg.p_min && closed <= cfg.p_max);
        let mut checked = 0;
        for (start, len) in inflation_runs(&log.rows) {
            let g = log.rows[start].side.index();
            let end = start + len;
            let Some(after) = log.rows.get(end) else { continue };
            let peak = after.pressure[g];
            assert!(peak <= cfg.p_max + 1e-12);
            let from = log.rows[start].pressure[g];
            if len == half_ticks && (from - cfg.p_min).abs() < 1e-12 {
                assert!((peak - closed).abs() < 1e-9, "peak {peak} vs {closed}");
                assert!((cfg.p_min..=cfg.p_max).contains(&peak));
                checked += 1;
            }
        }
        let cycles = (cfg.session_len / cfg.cycle_period) as usize;
        assert!(checked > cycles * 9 / 10, "{checked} of {cycles}");
    }
}

#[test]
fn cycle_frequency_is_in_physiological_band() {
    for cfg in grid() {
        let log = run_session(&cfg).unwrap();
        let starts: Vec<f64> = inflation_runs(&log.rows).iter().map(|(s, _)| log.rows[*s].t).collect();
        let mut intervals: Vec<f64> = starts
            .windows(2)
            .filter(|w| log.active_side_at(w[0]) == log.active_side_at(w[1]))
            .map(|w| w[1] - w[0])
            .collect();
        intervals.sort_by(f64::total_cmp);
        let median = intervals[intervals.len() / 2];
        assert!((median - cfg.cycle_period).abs() < 1e-9);
        let hz = 1.0 / median;
        assert!((0.5..=1.5).contains(&hz), "{hz}");
        assert!((cfg.cycle_frequency() - hz).abs() < 1e-9);
    }
}

#[test]
fn surface_temperature_holds_band_and_cap() {
    for cfg in grid() {
        let log = run_session(&cfg).unwrap();
        let (lo, hi) = temp_range(&log);
        assert!(lo >= cfg.heat_setpoint - cfg.heat_tolerance, "{lo}");
        assert!(hi <= cfg.heat_setpoint + cfg.heat_tolerance, "{hi}");
        assert!(hi <= cfg.heat_cap);
    }
}

#[test]
fn single_window_session_never_switches() {
    let cfg = ProtocolConfig {
        side_period: 1800.0,
        ..Default::default()
    };
    let log = run_session(&cfg).unwrap();
    assert!(log.side_changes().is_empty());
    assert!(log.switch_completions().is_empty());
    assert!(log.rows.iter().all(|r| r.side == Side::Left));
    assert!(check_safety(&log, &cfg).is_empty());
}

#[test]
fn runs_are_bit_identical() {
    let cfg = ProtocolConfig::default();
    let a = run_session(&cfg).unwrap();
    let b = run_session(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv_string(), b.to_csv_string());
}

fn command_kind() -> impl Strategy<Value = CommandKind> {
    prop_oneof![
        Just(CommandKind::Start),
        Just(CommandKind::Stop),
        Just(CommandKind::SideOverride(Side::Left)),
        Just(CommandKind::SideOverride(Side::Right)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn injected_commands_never_break_safety(
        cmds in prop::collection::vec((0u32..2400, command_kind()), 0..12),
        cycle in prop::sample::select(vec![1.0, 1.5, 2.0]),
    ) {
        let cfg = ProtocolConfig {
            cycle_period: cycle,
            side_period: 30.0,
            session_len: 120.0,
            ..Default::default()
        };
        let mut commands: Vec<Command> = cmds
            .into_iter()
            .map(|(k, kind)| Command { t: k as f64 * 0.05, kind })
            .collect();
        commands.sort_by(|a, b| a.t.total_cmp(&b.t));
        let log = run_session_with(&cfg, &commands).unwrap();
        let v = check_safety(&log, &cfg);
        prop_assert!(v.is_empty(), "{:?}", v);
        for r in &log.rows {
            prop_assert!(r.pressure[0] >= 0.0 && r.pressure[0] <= cfg.p_max);
            prop_assert!(r.pressure[1] >= 0.0 && r.pressure[1] <= cfg.p_max);
        }
    }
}
