use std::fmt::Write as _;

use anyhow::{anyhow, Context};
use ari_core::protocol::{check_safety, parse_command_script, run_session_with, ProtocolConfig};
use ari_core::synth::{make_dataset, BehaviorParams, DatasetOptions, ParamsSpec};
use serde::Serialize;

use crate::manifest::{read_input, resolve_layout, OutputDir, RunManifest};
use crate::{usage, CmdResult, Failure, SimulateChicksArgs, SimulateProtocolArgs};

pub const SESSION_LOG_FILE: &str = "session_log.csv";
pub const SAFETY_FILE: &str = "safety.txt";

#[derive(Serialize)]
struct ProtocolSummary<'a> {
    config: &'a ProtocolConfig,
    ticks: usize,
    cycle_frequency_hz: f64,
    side_changes_s: Vec<f64>,
    switch_completions_s: Vec<f64>,
    faults: usize,
    violations: usize,
    temp_min: f64,
    temp_max: f64,
    pressure_max: f64,
}

pub fn run_protocol(args: &SimulateProtocolArgs) -> CmdResult {
    let mut manifest = RunManifest::new("simulate-protocol", "", "");
    let cfg: ProtocolConfig = match &args.config {
        Some(p) => {
            let bytes = read_input(p)?;
            manifest.add_input(p, &bytes);
            serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ProtocolConfig::default(),
    };
    cfg.validate().map_err(|e| Failure::Data(anyhow!("invalid protocol config: {e}")))?;
    let commands = match &args.commands {
        Some(p) => {
            let bytes = read_input(p)?;
            manifest.add_input(p, &bytes);
            let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", p.display()))?;
            parse_command_script(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => Vec::new(),
    };
    let log = run_session_with(&cfg, &commands).map_err(|e| anyhow!("{e}"))?;
    let violations = check_safety(&log, &cfg);
    manifest.param("config", &cfg);
    manifest.param("commands", commands.len());

    let mut safety = format!("{} safety violations\n", violations.len());
    for v in &violations {
        let _ = writeln!(safety, "{v}");
    }
    for f in &log.faults {
        let _ = writeln!(
            safety,
            "fault: t={} s {:?} {:?} pump cut after {:.2} s",
            f.t, f.pump.group, f.pump.kind, f.on_time
        );
    }
    let (temp_min, temp_max) = log
        .rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.temp), b.max(r.temp)));
    let summary = ProtocolSummary {
        config: &cfg,
        ticks: log.rows.len(),
        cycle_frequency_hz: cfg.cycle_frequency(),
        side_changes_s: log.side_changes(),
        switch_completions_s: log.switch_completions().iter().map(|&i| log.rows[i].t).collect(),
        faults: log.faults.len(),
        violations: violations.len(),
        temp_min,
        temp_max,
        pressure_max: log.rows.iter().flat_map(|r| r.pressure).fold(0.0, f64::max),
    };

    let mut out = OutputDir::create(&args.out)?;
    out.write(SESSION_LOG_FILE, log.to_csv_string())?;
    out.write(SAFETY_FILE, &safety)?;
    out.write("summary.json", serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)? + "\n")?;
    out.finish(manifest)?;
    print!("{safety}");
    Ok(())
}

pub fn run_chicks(args: &SimulateChicksArgs) -> CmdResult {
    if args.n_chicks == 0 {
        return Err(usage("--n-chicks must be at least 1"));
    }
    if !(args.fps.is_finite() && args.fps > 0.0) {
        return Err(usage("--fps must be positive"));
    }
    if args.bin_seconds == 0 {
        return Err(usage("--bin-seconds must be positive"));
    }
    let mut manifest = RunManifest::new("simulate-chicks", "", &args.layout);
    let layout = resolve_layout(&args.layout, Some(&mut manifest))?;
    manifest.experiment_id = layout.experiment_id.clone();
    let params: BehaviorParams = match &args.behavior {
        Some(p) => {
            let bytes = read_input(p)?;
            manifest.add_input(p, &bytes);
            serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", p.display()))?
        }
        None => BehaviorParams::default(),
    };
    params.validate().map_err(|e| Failure::Data(anyhow!("{e}")))?;
    let session_len = args.session_seconds.unwrap_or(layout.session_len);
    if !(session_len.is_finite() && session_len > 0.0) {
        return Err(usage("--session-seconds must be positive"));
    }
    let opts = DatasetOptions {
        n_chicks: args.n_chicks,
        base_seed: args.seed,
        fps: args.fps,
        session_len,
        bin_len: args.bin_seconds,
    };
    manifest.param("behavior", &params);
    manifest.param("n_chicks", args.n_chicks);
    manifest.param("seed", args.seed);
    manifest.param("fps", args.fps);
    manifest.param("session_seconds", session_len);
    manifest.param("bin_seconds", args.bin_seconds);

    let ds = make_dataset(&layout, &ParamsSpec::Shared(params), &opts).map_err(|e| Failure::Data(anyhow!("{e}")))?;
    manifest.calibration_corners = Some(ds.pixel_corners);
    let mut out = OutputDir::create(&args.out)?;
    for c in &ds.chicks {
        out.write(&format!("tracks/{}.csv", c.chick_id), c.track.to_csv_string())?;
    }
    out.write("truth.csv", ds.truth_csv())?;
    out.write("sessions.csv", ds.sessions_csv())?;
    out.write("calibration.json", ds.calibration_json() + "\n")?;
    out.finish(manifest)?;
    eprintln!("{} synthetic recordings written", ds.chicks.len());
    Ok(())
}
