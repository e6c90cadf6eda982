//! Pose-tracker CSV ingestion: parsing, likelihood quality control, 1 Hz
//! downsampling and gap filling.
//!
//! The tracker export has three header rows (`scorer`, `bodyparts`,
//! `coords`) followed by one row per frame whose first column is the frame
//! index. Each keypoint contributes an `x`, `y`, `likelihood` column triple.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::arena::{CalibrationTransform, Point};

pub const DEFAULT_KEYPOINT: &str = "center";
pub const DEFAULT_QC_LIKELIHOOD: f64 = 0.6;
pub const DEFAULT_QC_FRACTION: f64 = 0.90;
/// Excursions beyond the arena up to this distance are clamped.
pub const CLAMP_TOLERANCE_MM: f64 = 5.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unknown keypoint {0:?}")]
    UnknownKeypoint(String),
    #[error("row {row}: likelihood outside [0,1]: {value}")]
    LikelihoodOutOfRange { row: usize, value: f64 },
    #[error("row {row}: non-monotonic frame index {index}")]
    NonMonotonicFrame { row: usize, index: u64 },
    #[error("row {row}: unparsable value {value:?} in column {column}")]
    BadNumber {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("row {row}: expected {expected} columns, found {found}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("fps must be positive and finite, got {0}")]
    BadFps(f64),
    #[error("empty track")]
    EmptyTrack,
    #[error("no usable samples: every one-second slot is empty")]
    AllSlotsEmpty,
    #[error("t={t}s: position ({x:.1}, {y:.1}) mm is more than {tol} mm outside the arena")]
    OutsideArena { t: u32, x: f64, y: f64, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub x: f64,
    pub y: f64,
    pub likelihood: f64,
}

/// Per-frame positions of one keypoint, in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrack {
    pub frames: Vec<Frame>,
    pub fps: f64,
    /// All keypoints present in the source header, in column order.
    pub keypoint_names: Vec<String>,
    /// The keypoint the frames belong to.
    pub keypoint: String,
    pub scorer: String,
}

impl RawTrack {
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Session length in whole seconds, counting from frame index 0.
    pub fn duration_slots(&self) -> usize {
        match self.frames.last() {
            Some(last) => ((last.index + 1) as f64 / self.fps).ceil() as usize,
            None => 0,
        }
    }

    /// Writes the track as a single-keypoint tracker CSV.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 + self.frames.len() * 48);
        let kp = &self.keypoint;
        let _ = writeln!(out, "scorer,{0},{0},{0}", self.scorer);
        let _ = writeln!(out, "bodyparts,{kp},{kp},{kp}");
        out.push_str("coords,x,y,likelihood\n");
        for f in &self.frames {
            let _ = writeln!(out, "{},{},{},{}", f.index, f.x, f.y, f.likelihood);
        }
        out
    }
}

fn parse_number(field: &str, row: usize, column: usize) -> Result<f64, IngestError> {
    let bad = || IngestError::BadNumber {
        row,
        column,
        value: field.to_string(),
    };
    let s = field.trim();
    // Plain decimal with optional exponent; rejects inf/nan spellings.
    let ok_chars = s
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
    if s.is_empty() || !ok_chars {
        return Err(bad());
    }
    let v: f64 = s.parse().map_err(|_| bad())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_index(field: &str, row: usize) -> Result<u64, IngestError> {
    let s = field.trim();
    if let Ok(i) = s.parse::<u64>() {
        return Ok(i);
    }
    // Some exports write the index as a float ("12.0").
    let v = parse_number(s, row, 0)?;
    if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 {
        Ok(v as u64)
    } else {
        Err(IngestError::BadNumber {
            row,
            column: 0,
            value: field.to_string(),
        })
    }
}

/// Parses tracker CSV text, keeping only `keypoint`.
pub fn parse_tracking_str(text: &str, keypoint: &str, fps: f64) -> Result<RawTrack, IngestError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(IngestError::BadFps(fps));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let mut header_row = |label: &str| -> Result<Vec<String>, IngestError> {
        let rec = records
            .next()
            .ok_or_else(|| IngestError::MalformedHeader(format!("missing {label} row")))?
            .map_err(|e| IngestError::MalformedHeader(e.to_string()))?;
        Ok(rec.iter().map(|s| s.trim().to_string()).collect())
    };
    let scorer = header_row("scorer")?;
    let bodyparts = header_row("bodyparts")?;
    let coords = header_row("coords")?;

    let width = scorer.len();
    if width < 4 || (width - 1) % 3 != 0 || bodyparts.len() != width || coords.len() != width {
        return Err(IngestError::MalformedHeader(format!(
            "expected 1 + 3k columns in every header row, got {} / {} / {}",
            scorer.len(),
            bodyparts.len(),
            coords.len()
        )));
    }
    if !scorer[0].eq_ignore_ascii_case("scorer")
        || !bodyparts[0].eq_ignore_ascii_case("bodyparts")
        || !coords[0].eq_ignore_ascii_case("coords")
    {
        return Err(IngestError::MalformedHeader(
            "header rows must start with scorer, bodyparts, coords".into(),
        ));
    }
    let mut keypoint_names = Vec::new();
    let mut selected = None;
    for k in 0..(width - 1) / 3 {
        let c = 1 + 3 * k;
        let name = &bodyparts[c];
        if bodyparts[c + 1] != *name || bodyparts[c + 2] != *name {
            return Err(IngestError::MalformedHeader(format!(
                "bodypart {name:?} does not span an x,y,likelihood triple"
            )));
        }
        if coords[c] != "x" || coords[c + 1] != "y" || coords[c + 2] != "likelihood" {
            return Err(IngestError::MalformedHeader(format!(
                "coordinate labels for {name:?} must be x,y,likelihood"
            )));
        }
        if keypoint_names.contains(name) {
            return Err(IngestError::MalformedHeader(format!("duplicate bodypart {name:?}")));
        }
        if name == keypoint {
            selected = Some(c);
        }
        keypoint_names.push(name.clone());
    }
    let col = selected.ok_or_else(|| IngestError::UnknownKeypoint(keypoint.to_string()))?;

    let mut frames: Vec<Frame> = Vec::new();
    for (i, rec) in records.enumerate() {
        // 1-based line number in the file
        let row = i + 4;
        let rec = rec.map_err(|e| IngestError::MalformedHeader(e.to_string()))?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(IngestError::RowLength {
                row,
                expected: width,
                found: rec.len(),
            });
        }
        let index = parse_index(&rec[0], row)?;
        let x = parse_number(&rec[col], row, col)?;
        let y = parse_number(&rec[col + 1], row, col + 1)?;
        let likelihood = parse_number(&rec[col + 2], row, col + 2)?;
        if !(0.0..=1.0).contains(&likelihood) {
            return Err(IngestError::LikelihoodOutOfRange {
                row,
                value: likelihood,
            });
        }
        if let Some(prev) = frames.last() {
            if index <= prev.index {
                return Err(IngestError::NonMonotonicFrame { row, index });
            }
        }
        frames.push(Frame {
            index,
            x,
            y,
            likelihood,
        });
    }
    Ok(RawTrack {
        frames,
        fps,
        keypoint_names,
        keypoint: keypoint.to_string(),
        scorer: scorer[1].clone(),
    })
}

/// Reads and parses a tracker CSV file.
pub fn parse_tracking_csv(path: &Path, keypoint: &str, fps: f64) -> Result<RawTrack, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tracking_str(&text, keypoint, fps)
}

/// Tracking-quality summary for one recording.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QcReport {
    pub total_frames: usize,
    pub good_frames: usize,
    pub good_fraction: f64,
    pub passed: bool,
    pub threshold_likelihood: f64,
    pub min_fraction: f64,
    /// Longest run of empty one-second slots, in seconds.
    pub max_gap_s: usize,
}

impl QcReport {
    pub const CSV_HEADER: &'static str =
        "total_frames,good_frames,good_fraction,passed,threshold_likelihood,min_fraction,max_gap_s";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.total_frames,
            self.good_frames,
            self.good_fraction,
            self.passed,
            self.threshold_likelihood,
            self.min_fraction,
            self.max_gap_s
        )
    }
}

/// Likelihood quality control. Both comparisons are inclusive.
pub fn qc_check(
    track: &RawTrack,
    threshold_likelihood: f64,
    min_fraction: f64,
) -> Result<QcReport, IngestError> {
    if track.is_empty() {
        return Err(IngestError::EmptyTrack);
    }
    let total = track.frames.len();
    let good = track
        .frames
        .iter()
        .filter(|f| f.likelihood >= threshold_likelihood)
        .count();
    let good_fraction = good as f64 / total as f64;
    // The quotient is correctly rounded, so 900/1000 compares equal to 0.90.
    let passed = good_fraction >= min_fraction - 1e-12;
    let slots = downsample_1hz(track, threshold_likelihood)?;
    Ok(QcReport {
        total_frames: total,
        good_frames: good,
        good_fraction,
        passed,
        threshold_likelihood,
        min_fraction,
        max_gap_s: max_gap(&slots),
    })
}

/// The selected frame for one second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotSample {
    pub frame_index: u64,
    pub x: f64,
    pub y: f64,
    pub likelihood: f64,
}

/// One entry per whole second `[k, k+1)`; empty when no frame in the
/// second reaches the likelihood threshold.
pub type Slots = Vec<Option<SlotSample>>;

/// Picks the highest-likelihood frame of each second (earliest on ties).
pub fn downsample_1hz(track: &RawTrack, threshold_likelihood: f64) -> Result<Slots, IngestError> {
    if track.is_empty() {
        return Err(IngestError::EmptyTrack);
    }
    if !(track.fps.is_finite() && track.fps > 0.0) {
        return Err(IngestError::BadFps(track.fps));
    }
    let n = track.duration_slots();
    let mut slots: Slots = vec![None; n];
    for f in &track.frames {
        let k = ((f.index as f64) / track.fps).floor() as usize;
        let k = k.min(n - 1);
        if f.likelihood < threshold_likelihood {
            continue;
        }
        match &slots[k] {
            Some(s) if s.likelihood >= f.likelihood => {}
            _ => {
                slots[k] = Some(SlotSample {
                    frame_index: f.index,
                    x: f.x,
                    y: f.y,
                    likelihood: f.likelihood,
                })
            }
        }
    }
    Ok(slots)
}

fn max_gap(slots: &Slots) -> usize {
    let mut best = 0;
    let mut run = 0;
    for s in slots {
        if s.is_none() {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t: u32,
    pub x: f64,
    pub y: f64,
    pub interpolated: bool,
}

/// Gap-free 1 Hz trajectory in arena millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub chick_id: String,
    pub samples: Vec<TrackPoint>,
    pub session_len: u32,
    /// Samples pulled back onto the arena boundary.
    pub clamped: usize,
}

impl Trajectory {
    pub fn interpolated_count(&self) -> usize {
        self.samples.iter().filter(|s| s.interpolated).count()
    }

    pub const CSV_HEADER: &'static str = "t,x_mm,y_mm,interpolated";

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(32 + self.samples.len() * 32);
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{},{}", s.t, s.x, s.y, u8::from(s.interpolated));
        }
        out
    }

    /// Parses the format written by [`Trajectory::to_csv_string`].
    pub fn from_csv_str(chick_id: &str, text: &str) -> Result<Trajectory, IngestError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| IngestError::MalformedHeader("empty trajectory file".into()))?;
        if header.trim() != Self::CSV_HEADER {
            return Err(IngestError::MalformedHeader(format!(
                "expected trajectory header {:?}",
                Self::CSV_HEADER
            )));
        }
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(IngestError::RowLength {
                    row,
                    expected: 4,
                    found: fields.len(),
                });
            }
            let t = fields[0].trim().parse::<u32>().map_err(|_| IngestError::BadNumber {
                row,
                column: 0,
                value: fields[0].to_string(),
            })?;
            if t as usize != samples.len() {
                return Err(IngestError::NonMonotonicFrame { row, index: t as u64 });
            }
            let interpolated = match fields[3].trim() {
                "0" | "false" => false,
                "1" | "true" => true,
                other => {
                    return Err(IngestError::BadNumber {
                        row,
                        column: 3,
                        value: other.to_string(),
                    })
                }
            };
            samples.push(TrackPoint {
                t,
                x: parse_number(fields[1], row, 1)?,
                y: parse_number(fields[2], row, 2)?,
                interpolated,
            });
        }
        if samples.is_empty() {
            return Err(IngestError::EmptyTrack);
        }
        Ok(Trajectory {
            chick_id: chick_id.to_string(),
            session_len: samples.len() as u32,
            samples,
            clamped: 0,
        })
    }
}

/// Fills empty slots and maps pixels to millimetres.
///
/// Interior gaps are interpolated linearly between the nearest filled
/// neighbours; leading and trailing gaps repeat the nearest valid sample.
/// When `arena_mm` is given, positions within [`CLAMP_TOLERANCE_MM`] of the
/// arena are clamped onto it and anything further out is an error.
pub fn interpolate_gaps(
    slots: &[Option<SlotSample>],
    transform: &CalibrationTransform,
    arena_mm: Option<(f64, f64)>,
    chick_id: &str,
) -> Result<Trajectory, IngestError> {
    let filled: Vec<usize> = slots
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|_| i))
        .collect();
    if filled.is_empty() {
        return Err(IngestError::AllSlotsEmpty);
    }
    let pos = |i: usize| -> Point {
        let s = slots[i].expect("filled slot");
        [s.x, s.y]
    };

    let mut px: Vec<(Point, bool)> = Vec::with_capacity(slots.len());
    let first = filled[0];
    let last = *filled.last().unwrap();
    for _ in 0..first {
        px.push((pos(first), true));
    }
    for w in filled.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (pa, pb) = (pos(a), pos(b));
        px.push((pa, false));
        let span = (b - a) as f64;
        for k in a + 1..b {
            let f = (k - a) as f64 / span;
            px.push(([pa[0] + f * (pb[0] - pa[0]), pa[1] + f * (pb[1] - pa[1])], true));
        }
    }
    px.push((pos(last), false));
    for _ in last + 1..slots.len() {
        px.push((pos(last), true));
    }

    let mut clamped = 0;
    let mut samples = Vec::with_capacity(px.len());
    for (t, (p, interpolated)) in px.into_iter().enumerate() {
        let mut mm = transform.apply(p);
        if let Some((w, h)) = arena_mm {
            let cx = mm[0].clamp(0.0, w);
            let cy = mm[1].clamp(0.0, h);
            let off = ((mm[0] - cx).powi(2) + (mm[1] - cy).powi(2)).sqrt();
            if off > CLAMP_TOLERANCE_MM {
                return Err(IngestError::OutsideArena {
                    t: t as u32,
                    x: mm[0],
                    y: mm[1],
                    tol: CLAMP_TOLERANCE_MM,
                });
            }
            if off > 0.0 {
                clamped += 1;
                mm = [cx, cy];
            }
        }
        samples.push(TrackPoint {
            t: t as u32,
            x: mm[0],
            y: mm[1],
            interpolated,
        });
    }
    Ok(Trajectory {
        chick_id: chick_id.to_string(),
        session_len: samples.len() as u32,
        samples,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "\
scorer,DLC_resnet50,DLC_resnet50,DLC_resnet50,DLC_resnet50,DLC_resnet50,DLC_resnet50
bodyparts,head,head,head,center,center,center
coords,x,y,likelihood,x,y,likelihood
0,10.5,20.25,0.9,100.0,200.0,0.99
1,11.5,21.25,0.8,101.5,201.5,0.95
2,12.5,22.25,0.7,102.0,2.02e2,0.5
3,13.5,23.25,0.6,103.25,203.75,1
4,14.5,24.25,0.5,104.0,204.0,0.0
";

    #[test]
    fn parses_selected_keypoint() {
        let t = parse_tracking_str(FIXTURE, "center", 10.0).unwrap();
        assert_eq!(t.keypoint_names, vec!["head", "center"]);
        assert_eq!(t.frames.len(), 5);
        assert_eq!(
            t.frames[2],
            Frame {
                index: 2,
                x: 102.0,
                y: 202.0,
                likelihood: 0.5
            }
        );
        assert_eq!(t.frames[3].x, 103.25);
        assert_eq!(t.frames[3].likelihood, 1.0);
        let h = parse_tracking_str(FIXTURE, "head", 10.0).unwrap();
        assert_eq!(h.frames[4].y, 24.25);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_tracking_str("", "center", 10.0), Err(IngestError::MalformedHeader(_))));
        assert!(matches!(
            parse_tracking_str(FIXTURE, "tail", 10.0),
            Err(IngestError::UnknownKeypoint(_))
        ));
        let bad_l = FIXTURE.replace("103.25,203.75,1", "103.25,203.75,1.3");
        assert!(matches!(
            parse_tracking_str(&bad_l, "center", 10.0),
            Err(IngestError::LikelihoodOutOfRange { value, .. }) if value == 1.3
        ));
        let order = FIXTURE.replace("\n3,", "\n1,");
        assert!(matches!(
            parse_tracking_str(&order, "center", 10.0),
            Err(IngestError::NonMonotonicFrame { .. })
        ));
        let nan = FIXTURE.replace("101.5", "nan");
        assert!(matches!(parse_tracking_str(&nan, "center", 10.0), Err(IngestError::BadNumber { .. })));
        let comma = FIXTURE.replace("101.5", "101,5");
        assert!(parse_tracking_str(&comma, "center", 10.0).is_err());
        assert!(matches!(
            parse_tracking_csv(Path::new("/nonexistent/track.csv"), "center", 10.0),
            Err(IngestError::Io { .. })
        ));
    }

    fn track(likelihoods: &[f64], fps: f64) -> RawTrack {
        RawTrack {
            frames: likelihoods
                .iter()
                .enumerate()
                .map(|(i, &l)| Frame {
                    index: i as u64,
                    x: i as f64,
                    y: 2.0 * i as f64,
                    likelihood: l,
                })
                .collect(),
            fps,
            keypoint_names: vec!["center".into()],
            keypoint: "center".into(),
            scorer: "test".into(),
        }
    }

    #[test]
    fn qc_boundary_cases() {
        let mut l = vec![0.8; 9];
        l.push(0.5);
        let r = qc_check(&track(&l, 10.0), 0.6, 0.9).unwrap();
        assert_eq!(r.good_fraction, 0.9);
        assert!(r.passed);

        let r = qc_check(&track(&[1.0; 20], 10.0), 0.6, 0.9).unwrap();
        assert!(r.passed);
        assert_eq!(r.good_fraction, 1.0);

        let mut l = vec![0.9; 899];
        l.extend(std::iter::repeat(0.1).take(101));
        let r = qc_check(&track(&l, 10.0), 0.6, 0.9).unwrap();
        assert_eq!(r.good_frames, 899);
        assert_eq!(r.good_fraction, 0.899);
        assert!(!r.passed);
        // seconds 90..99 hold only low-likelihood frames
        assert_eq!(r.max_gap_s, 10);

        // likelihood exactly at threshold counts
        let r = qc_check(&track(&[0.6; 10], 10.0), 0.6, 0.9).unwrap();
        assert!(r.passed);
        assert!(matches!(qc_check(&track(&[], 10.0), 0.6, 0.9), Err(IngestError::EmptyTrack)));
    }

    #[test]
    fn downsample_selects_best_frame() {
        let l = [0.2, 0.95, 0.95, 0.3, 0.3, 0.3];
        let slots = downsample_1hz(&track(&l, 3.0), 0.6).unwrap();
        assert_eq!(slots.len(), 2);
        assert_eq!(slots[0].unwrap().frame_index, 1);
        assert!(slots[1].is_none());
    }

    #[test]
    fn downsample_full_session() {
        let slots = downsample_1hz(&track(&vec![0.9; 18000], 10.0), 0.6).unwrap();
        assert_eq!(slots.len(), 1800);
        assert!(slots.iter().all(Option::is_some));
    }

    fn slot(x: f64, y: f64) -> Option<SlotSample> {
        Some(SlotSample {
            frame_index: 0,
            x,
            y,
            likelihood: 1.0,
        })
    }

    #[test]
    fn interior_gap_is_linear() {
        let slots = vec![slot(0.0, 0.0), None, None, None, slot(100.0, 40.0)];
        let tr = interpolate_gaps(&slots, &CalibrationTransform::identity(), None, "c").unwrap();
        let xs: Vec<f64> = tr.samples.iter().map(|s| s.x).collect();
        assert_eq!(xs, vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        assert_eq!(tr.samples[2].y, 20.0);
        assert!(tr.samples[1].interpolated && !tr.samples[4].interpolated);
    }

    #[test]
    fn edge_gaps_extend_nearest() {
        let slots = vec![None, None, None, slot(10.0, 20.0), slot(11.0, 21.0), None];
        let tr = interpolate_gaps(&slots, &CalibrationTransform::identity(), None, "c").unwrap();
        for s in &tr.samples[..3] {
            assert_eq!((s.x, s.y, s.interpolated), (10.0, 20.0, true));
        }
        assert_eq!((tr.samples[5].x, tr.samples[5].interpolated), (11.0, true));
        assert!(matches!(
            interpolate_gaps(&[None, None], &CalibrationTransform::identity(), None, "c"),
            Err(IngestError::AllSlotsEmpty)
        ));
    }

    #[test]
    fn clamping_and_excursions() {
        let slots = vec![slot(-3.0, 10.0), slot(50.0, 604.0)];
        let tr = interpolate_gaps(&slots, &CalibrationTransform::identity(), Some((900.0, 600.0)), "c")
            .unwrap();
        assert_eq!(tr.clamped, 2);
        assert_eq!((tr.samples[0].x, tr.samples[1].y), (0.0, 600.0));
        let far = vec![slot(-30.0, 10.0)];
        assert!(matches!(
            interpolate_gaps(&far, &CalibrationTransform::identity(), Some((900.0, 600.0)), "c"),
            Err(IngestError::OutsideArena { .. })
        ));
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let slots = vec![slot(1.5, 2.0), None, slot(3.5, 4.25)];
        let tr = interpolate_gaps(&slots, &CalibrationTransform::identity(), None, "c7").unwrap();
        let back = Trajectory::from_csv_str("c7", &tr.to_csv_string()).unwrap();
        assert_eq!(back.samples, tr.samples);
    }
}
