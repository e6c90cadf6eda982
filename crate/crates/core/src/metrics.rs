//! Per-second zone occupancy and the time-fraction preference metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{chance_level, ArenaLayout, Metric, Side};
use crate::ingest::Trajectory;

pub const DEFAULT_BIN_SECONDS: u32 = 300;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("frame mismatch: {0}")]
    FrameMismatch(String),
    #[error("empty occupancy series")]
    EmptyOccupancy,
    #[error("bin length must be positive")]
    BadBinLength,
    #[error("malformed preference table: {0}")]
    Table(String),
}

/// Alternating breathing side: `start_side` during `[0, period)`, the other
/// side during `[period, 2 period)`, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreathingSchedule {
    pub start_side: Side,
    pub period: f64,
    pub session_len: f64,
}

impl BreathingSchedule {
    pub fn new(start_side: Side, period: f64, session_len: f64) -> Self {
        BreathingSchedule {
            start_side,
            period,
            session_len,
        }
    }

    pub fn for_layout(layout: &ArenaLayout, start_side: Side) -> Self {
        Self::new(start_side, layout.breathing_period, layout.session_len)
    }

    pub fn active_side(&self, t: f64) -> Side {
        let window = (t / self.period).floor() as i64;
        if window.rem_euclid(2) == 0 {
            self.start_side
        } else {
            self.start_side.other()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyRecord {
    pub t: u32,
    /// Index into the layout's zones.
    pub zone: Option<usize>,
    pub on_face: bool,
    pub on_heated: bool,
    pub on_breathing: bool,
    pub interpolated: bool,
    /// Whether this second enters the metrics at all.
    pub counted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySeries {
    pub chick_id: String,
    pub records: Vec<OccupancyRecord>,
    pub session_len: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OccupancyOptions {
    /// Drop seconds whose position was interpolated (sensitivity analysis).
    pub exclude_interpolated: bool,
}

/// Labels each second of the trajectory with the zone it falls in and the
/// stimuli present there.
pub fn zone_occupancy(
    traj: &Trajectory,
    layout: &ArenaLayout,
    sched: &BreathingSchedule,
    opts: OccupancyOptions,
) -> Result<OccupancySeries, MetricsError> {
    if (sched.session_len - traj.session_len as f64).abs() > 1e-9 {
        return Err(MetricsError::FrameMismatch(format!(
            "schedule covers {} s but trajectory covers {} s",
            sched.session_len, traj.session_len
        )));
    }
    let tol = 1e-6;
    let mut records = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        if s.x < -tol || s.y < -tol || s.x > layout.width + tol || s.y > layout.height + tol {
            return Err(MetricsError::FrameMismatch(format!(
                "t={} s: ({}, {}) lies outside the {} x {} mm arena",
                s.t, s.x, s.y, layout.width, layout.height
            )));
        }
        let zone = layout.zone_at([s.x, s.y]);
        let (on_face, on_heated, on_breathing) = match zone {
            Some(i) => {
                let z = &layout.zones[i];
                let active = sched.active_side(s.t as f64);
                (z.has_face, z.heated, z.breathing_group == Some(active))
            }
            None => (false, false, false),
        };
        records.push(OccupancyRecord {
            t: s.t,
            zone,
            on_face,
            on_heated,
            on_breathing,
            interpolated: s.interpolated,
            counted: !(opts.exclude_interpolated && s.interpolated),
        });
    }
    Ok(OccupancySeries {
        chick_id: traj.chick_id.clone(),
        records,
        session_len: traj.session_len,
    })
}

/// Raw second counts behind one set of preference values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub seconds: u32,
    pub in_zone: u32,
    pub face: u32,
    pub heated: u32,
    pub breathing: u32,
}

impl Tally {
    fn add(&mut self, r: &OccupancyRecord) {
        if !r.counted {
            return;
        }
        self.seconds += 1;
        if r.zone.is_some() {
            self.in_zone += 1;
            self.face += u32::from(r.on_face);
            self.heated += u32::from(r.on_heated);
            self.breathing += u32::from(r.on_breathing);
        }
    }

    fn values(&self, applies: impl Fn(Metric) -> bool) -> PreferenceValues {
        let cond = |num: u32, m: Metric| {
            (applies(m) && self.in_zone > 0).then(|| num as f64 / self.in_zone as f64)
        };
        PreferenceValues {
            interface: (self.seconds > 0).then(|| self.in_zone as f64 / self.seconds as f64),
            face: cond(self.face, Metric::Face),
            heating: cond(self.heated, Metric::Heating),
            breathing: cond(self.breathing, Metric::Breathing),
        }
    }
}

/// The four metrics; `None` marks a value that is undefined (no time in
/// any zone, or a cue the layout does not offer).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PreferenceValues {
    pub interface: Option<f64>,
    pub face: Option<f64>,
    pub heating: Option<f64>,
    pub breathing: Option<f64>,
}

impl PreferenceValues {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Interface => self.interface,
            Metric::Face => self.face,
            Metric::Heating => self.heating,
            Metric::Breathing => self.breathing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinPreferences {
    /// 1-based bin number.
    pub bin: u32,
    pub tally: Tally,
    pub values: PreferenceValues,
    /// Shorter than the nominal bin length.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChanceLevels {
    pub interface: f64,
    pub face: f64,
    pub heating: f64,
    pub breathing: f64,
}

impl ChanceLevels {
    pub fn for_layout(layout: &ArenaLayout) -> Self {
        ChanceLevels {
            interface: chance_level(layout, Metric::Interface),
            face: chance_level(layout, Metric::Face),
            heating: chance_level(layout, Metric::Heating),
            breathing: chance_level(layout, Metric::Breathing),
        }
    }

    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Interface => self.interface,
            Metric::Face => self.face,
            Metric::Heating => self.heating,
            Metric::Breathing => self.breathing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreferenceSeries {
    pub chick_id: String,
    pub experiment_id: String,
    pub bin_len: u32,
    pub bins: Vec<BinPreferences>,
    pub session: Tally,
    pub session_values: PreferenceValues,
    pub chance: ChanceLevels,
}

/// Preference metrics per time bin and for the whole session. Second `t`
/// belongs to bin `t / bin_len + 1`.
pub fn compute_preferences(
    occ: &OccupancySeries,
    layout: &ArenaLayout,
    bin_len: u32,
) -> Result<PreferenceSeries, MetricsError> {
    if bin_len == 0 {
        return Err(MetricsError::BadBinLength);
    }
    if occ.records.is_empty() {
        return Err(MetricsError::EmptyOccupancy);
    }
    let n_bins = occ.session_len.div_ceil(bin_len) as usize;
    let mut tallies = vec![Tally::default(); n_bins];
    let mut session = Tally::default();
    for r in &occ.records {
        let b = ((r.t / bin_len) as usize).min(n_bins - 1);
        tallies[b].add(r);
        session.add(r);
    }
    let applies = |m| layout.metric_applies(m);
    let bins = tallies
        .iter()
        .enumerate()
        .map(|(i, tally)| {
            let start = i as u32 * bin_len;
            let len = (occ.session_len - start).min(bin_len);
            BinPreferences {
                bin: i as u32 + 1,
                tally: *tally,
                values: tally.values(applies),
                truncated: len < bin_len,
            }
        })
        .collect();
    Ok(PreferenceSeries {
        chick_id: occ.chick_id.clone(),
        experiment_id: layout.experiment_id.clone(),
        bin_len,
        bins,
        session,
        session_values: session.values(applies),
        chance: ChanceLevels::for_layout(layout),
    })
}

pub const BIN_CSV_HEADER: &str =
    "chick_id,experiment_id,bin,metric,value,chance,missing,in_zone_s,bin_s,truncated";
pub const SESSION_CSV_HEADER: &str =
    "chick_id,experiment_id,metric,value,chance,missing,in_zone_s,session_s";

fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long-format rows, one per (chick, bin, metric).
pub fn write_bin_rows(series: &[PreferenceSeries], metrics: &[Metric]) -> String {
    let mut out = String::new();
    out.push_str(BIN_CSV_HEADER);
    out.push('\n');
    for s in series {
        for b in &s.bins {
            for &m in metrics {
                let v = b.values.get(m);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    s.chick_id,
                    s.experiment_id,
                    b.bin,
                    m,
                    fmt_value(v),
                    s.chance.get(m),
                    u8::from(v.is_none()),
                    b.tally.in_zone,
                    b.tally.seconds,
                    u8::from(b.truncated)
                );
            }
        }
    }
    out
}

/// Session-level rows, one per (chick, metric).
pub fn write_session_rows(series: &[PreferenceSeries], metrics: &[Metric]) -> String {
    let mut out = String::new();
    out.push_str(SESSION_CSV_HEADER);
    out.push('\n');
    for s in series {
        for &m in metrics {
            let v = s.session_values.get(m);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.chick_id,
                s.experiment_id,
                m,
                fmt_value(v),
                s.chance.get(m),
                u8::from(v.is_none()),
                s.session.in_zone,
                s.session.seconds
            );
        }
    }
    out
}

/// One parsed row of the per-bin long-format table.
#[derive(Debug, Clone, PartialEq)]
pub struct BinRow {
    pub chick_id: String,
    pub experiment_id: String,
    pub bin: u32,
    pub metric: Metric,
    pub value: Option<f64>,
    pub chance: f64,
    pub in_zone_s: u32,
    pub bin_s: u32,
    pub truncated: bool,
}

#[derive(Debug, Deserialize)]
struct RawBinRow {
    chick_id: String,
    experiment_id: String,
    bin: u32,
    metric: String,
    value: String,
    chance: f64,
    missing: u8,
    in_zone_s: u32,
    bin_s: u32,
    truncated: u8,
}

/// Parses the table written by [`write_bin_rows`].
pub fn parse_bin_rows(text: &str) -> Result<Vec<BinRow>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| MetricsError::Table(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != BIN_CSV_HEADER {
        return Err(MetricsError::Table(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<RawBinRow>().enumerate() {
        let line = i + 2;
        let r = rec.map_err(|e| MetricsError::Table(format!("line {line}: {e}")))?;
        let metric: Metric = r
            .metric
            .parse()
            .map_err(|e| MetricsError::Table(format!("line {line}: {e}")))?;
        let value = if r.value.trim().is_empty() {
            None
        } else {
            let v: f64 = r
                .value
                .trim()
                .parse()
                .map_err(|_| MetricsError::Table(format!("line {line}: bad value {:?}", r.value)))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(MetricsError::Table(format!("line {line}: value {v} outside [0,1]")));
            }
            Some(v)
        };
        if (r.missing == 1) != value.is_none() || r.missing > 1 {
            return Err(MetricsError::Table(format!(
                "line {line}: missing flag disagrees with value"
            )));
        }
        if !(r.chance > 0.0 && r.chance <= 1.0) {
            return Err(MetricsError::Table(format!("line {line}: chance {} outside (0,1]", r.chance)));
        }
        if r.bin == 0 || r.truncated > 1 {
            return Err(MetricsError::Table(format!("line {line}: bad bin or truncated flag")));
        }
        rows.push(BinRow {
            chick_id: r.chick_id,
            experiment_id: r.experiment_id,
            bin: r.bin,
            metric,
            value,
            chance: r.chance,
            in_zone_s: r.in_zone_s,
            bin_s: r.bin_s,
            truncated: r.truncated == 1,
        });
    }
    Ok(rows)
}
