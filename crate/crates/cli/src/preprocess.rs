use std::collections::BTreeSet;
use std::fmt::Write as _;

use anyhow::anyhow;
use ari_core::arena::{calibrate, CalibrationTransform};
use ari_core::ingest::{downsample_1hz, interpolate_gaps, parse_tracking_str, qc_check, QcReport};

use crate::manifest::{read_calibration, read_input, resolve_layout, OutputDir, RunManifest};
use crate::{usage, CmdResult, Failure, PreprocessArgs};

pub const TRAJECTORY_INDEX: &str = "trajectories.csv";
pub const QC_FILE: &str = "qc.csv";
pub const EXCLUSIONS_FILE: &str = "exclusions.csv";

struct Exclusion {
    chick_id: String,
    reason: &'static str,
    detail: String,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn run(args: &PreprocessArgs) -> CmdResult {
    if args.inputs.is_empty() {
        return Err(usage("no inputs"));
    }
    if !(args.qc_likelihood.is_finite() && (0.0..=1.0).contains(&args.qc_likelihood)) {
        return Err(usage("--qc-likelihood must lie in [0, 1]"));
    }
    if !(args.qc_fraction.is_finite() && (0.0..=1.0).contains(&args.qc_fraction)) {
        return Err(usage("--qc-fraction must lie in [0, 1]"));
    }
    if !(args.fps.is_finite() && args.fps > 0.0) {
        return Err(usage("--fps must be positive"));
    }

    let mut manifest = RunManifest::new("preprocess", "", &args.layout);
    let layout = resolve_layout(&args.layout, Some(&mut manifest))?;
    manifest.experiment_id = layout.experiment_id.clone();
    let arena = (layout.width, layout.height);
    let transform = match &args.calibration {
        Some(path) => {
            let corners = read_calibration(path, &mut manifest)?;
            manifest.calibration_corners = Some(corners);
            calibrate(&corners, arena).map_err(|e| anyhow!("calibration {}: {e}", path.display()))?
        }
        None => CalibrationTransform::identity(),
    };
    manifest.param("qc_likelihood", args.qc_likelihood);
    manifest.param("qc_fraction", args.qc_fraction);
    manifest.param("keypoint", &args.keypoint);
    manifest.param("fps", args.fps);

    let mut seen = BTreeSet::new();
    for path in &args.inputs {
        let id = chick_id_of(path)?;
        if !seen.insert(id.clone()) {
            return Err(Failure::Data(anyhow!("duplicate chick id {id:?} (from {})", path.display())));
        }
    }

    let mut out = OutputDir::create(&args.out)?;
    let mut qc_rows = format!("chick_id,{},interpolated_s,clamped_s\n", QcReport::CSV_HEADER);
    let mut index = String::from("chick_id,file,session_s,interpolated_s,clamped_s\n");
    let mut exclusions: Vec<Exclusion> = Vec::new();
    let mut kept = 0usize;

    let mut inputs: Vec<_> = args.inputs.iter().map(|p| (chick_id_of(p).expect("checked"), p)).collect();
    inputs.sort();
    for (id, path) in inputs {
        let bytes = read_input(path)?;
        manifest.add_input(path, &bytes);
        let mut exclude = |reason, detail: String| {
            exclusions.push(Exclusion {
                chick_id: id.clone(),
                reason,
                detail,
            })
        };
        let Ok(text) = String::from_utf8(bytes) else {
            exclude("parse_error", "file is not UTF-8".into());
            continue;
        };
        let track = match parse_tracking_str(&text, &args.keypoint, args.fps) {
            Ok(t) => t,
            Err(e) => {
                exclude("parse_error", e.to_string());
                continue;
            }
        };
        let qc = match qc_check(&track, args.qc_likelihood, args.qc_fraction) {
            Ok(q) => q,
            Err(e) => {
                exclude("parse_error", e.to_string());
                continue;
            }
        };
        if !qc.passed {
            let _ = writeln!(qc_rows, "{},{},,", id, qc.to_csv_row());
            exclude(
                "qc_failed",
                format!("good fraction {:.4} below {}", qc.good_fraction, args.qc_fraction),
            );
            continue;
        }
        let traj = downsample_1hz(&track, args.qc_likelihood)
            .and_then(|slots| interpolate_gaps(&slots, &transform, Some(arena), &id));
        let traj = match traj {
            Ok(t) => t,
            Err(e) => {
                let _ = writeln!(qc_rows, "{},{},,", id, qc.to_csv_row());
                exclude("outside_arena", e.to_string());
                continue;
            }
        };
        let (interp, clamped) = (traj.interpolated_count(), traj.clamped);
        let _ = writeln!(qc_rows, "{},{},{},{}", id, qc.to_csv_row(), interp, clamped);
        let file = format!("trajectories/{id}.csv");
        out.write(&file, traj.to_csv_string())?;
        let _ = writeln!(index, "{},{},{},{},{}", csv_field(&id), file, traj.session_len, interp, clamped);
        kept += 1;
    }

    let mut excl = String::from("chick_id,reason,detail\n");
    for e in &exclusions {
        let _ = writeln!(excl, "{},{},{}", csv_field(&e.chick_id), e.reason, csv_field(&e.detail));
    }
    out.write(QC_FILE, qc_rows)?;
    out.write(EXCLUSIONS_FILE, excl)?;
    out.write(TRAJECTORY_INDEX, index)?;
    out.finish(manifest)?;

    eprintln!("{kept} trajectories written, {} excluded", exclusions.len());
    if kept == 0 {
        return Err(Failure::Data(anyhow!("every recording was excluded")));
    }
    Ok(())
}

fn chick_id_of(path: &std::path::Path) -> Result<String, Failure> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .ok_or_else(|| usage(format!("cannot derive a chick id from {}", path.display())))
}
